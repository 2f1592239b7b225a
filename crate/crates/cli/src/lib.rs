//! Command-line front end: scenario files, solving, verification reports and
//! plot data.

pub mod commands;
pub mod config;
mod output;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] gtv_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use gtv_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::InfeasibleProblem { .. } | E::BracketFailure { .. } => EXIT_INFEASIBLE,
                E::InvalidOperator(_)
                | E::UnsupportedOperator(_)
                | E::IdentityHasNoGreenFunction
                | E::NullspaceNotIdentifiable { .. }
                | E::DimensionMismatch(_)
                | E::InadmissibleFunctional(_)
                | E::NoMeasurements
                | E::GridTooCoarse { .. }
                | E::GridTooShort { .. }
                | E::IllPosedNullspace { .. }
                | E::InvalidConstraint(_)
                | E::InvalidInput(_) => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            },
            CliError::Io(_) => EXIT_FAILURE,
        }
    }
}
