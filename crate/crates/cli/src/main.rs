use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtv_cli::commands::{cmd_demo, cmd_denoise, cmd_interpolate, cmd_recover_measure, cmd_verify_operator};
use gtv_cli::config::{Overrides, RunConfig};
use gtv_cli::{CliError, EXIT_CONFIG, EXIT_OK};

/// Sparse reconstruction by generalized total-variation minimization.
#[derive(Parser, Debug)]
#[command(name = "gtv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML, or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Noise and verification seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of grid points.
    #[arg(long, global = true)]
    grid_n: Option<usize>,

    /// Fixed penalty; selects the penalized solver.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Ball radius; replaces the constraint.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Fail when the null space is poorly observed.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    Interpolate,
    Denoise,
    RecoverMeasure,
    VerifyOperator {
        /// Check the uncorrected convolution kernel.
        #[arg(long)]
        shift_invariant: bool,
    },
    /// Bundled scenarios.
    Demo,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        grid_n: cli.grid_n,
        lambda: cli.lambda,
        epsilon: cli.epsilon,
        strict: cli.strict,
        shift_invariant: false,
    };
    if let Command::Demo = cli.command {
        return cmd_demo(&cli.out.unwrap_or_else(|| PathBuf::from("out")));
    }
    if let Command::VerifyOperator { shift_invariant } = cli.command {
        overrides.shift_invariant = shift_invariant;
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply(&overrides)?;
    match cli.command {
        Command::Interpolate => cmd_interpolate(&cfg),
        Command::Denoise => cmd_denoise(&cfg),
        Command::RecoverMeasure => cmd_recover_measure(&cfg),
        Command::VerifyOperator { .. } => cmd_verify_operator(&cfg),
        Command::Demo => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GTV_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("gtv: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
