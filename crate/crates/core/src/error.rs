use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (|a[{row},{col}] - a[{col},{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("parameter out of domain: {0}")]
    ParameterOutOfDomain(String),

    #[error("non-positive input at index {index}: {value}")]
    NonPositiveInput { index: usize, value: f64 },

    #[error("non-finite input at index {0}")]
    NonFiniteInput(usize),

    #[error("log-likelihood is not finite")]
    NonFiniteLikelihood,

    #[error("sample is empty")]
    EmptySample,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("importance weights are degenerate (effective sample size {ess:.1} of {n})")]
    DegenerateWeights { ess: f64, n: usize },

    #[error("argument {0} outside the supported range")]
    Overflow(f64),

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParameterOutOfDomain(msg.into()))
}
