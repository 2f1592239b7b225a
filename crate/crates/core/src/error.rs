use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("the identity operator has no Green's function (its impulse response is a Dirac)")]
    IdentityHasNoGreenFunction,

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("grid has {len} samples but the stencil needs at least {needed}")]
    GridTooShort { len: usize, needed: usize },

    #[error("operator is not supported here: {0}")]
    UnsupportedOperator(String),

    #[error("null space is not identifiable from the measurements (smallest singular value {sigma_min:e})")]
    NullspaceNotIdentifiable { sigma_min: f64 },

    #[error("normal equations are singular (smallest singular value {sigma_min:e})")]
    SingularNormalEquations { sigma_min: f64 },

    #[error("operator has an empty null space")]
    EmptyNullspace,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("functional is not admissible for this operator: {0}")]
    InadmissibleFunctional(String),

    #[error("quadrature did not reach tolerance on [{lo}, {hi}]")]
    QuadratureFailure { lo: f64, hi: f64 },

    #[error("at least one measurement is required")]
    NoMeasurements,

    #[error("grid must have more atoms than measurements (N = {atoms}, M = {measurements})")]
    GridTooCoarse { atoms: usize, measurements: usize },

    #[error("measurements are ill-posed over the null space (bound B = {bound:e})")]
    IllPosedNullspace { bound: f64 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("problem is infeasible (residual {residual:e})")]
    InfeasibleProblem { residual: f64 },

    #[error("problem is unbounded")]
    UnboundedProblem,

    #[error("simplex exceeded {0} iterations")]
    CyclingDetected(usize),

    #[error("solver did not converge within {0} iterations")]
    MaxIter(usize),

    #[error("even the smallest penalty cannot bring the residual below epsilon = {epsilon:e} (best {best:e})")]
    BracketFailure { epsilon: f64, best: f64 },

    #[error("problem too large for brute-force enumeration: {0}")]
    TooLarge(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
