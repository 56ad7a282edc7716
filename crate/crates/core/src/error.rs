use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite spectrum value at omega = {omega} rad/s")]
    NonFinite { omega: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },

    #[error("conjugate pairing failed: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Pairing { residual: f64, tolerance: f64 },

    #[error("unstable dynamics: largest eigenvalue real part {max_real:e} rad/s")]
    Unstable { max_real: f64 },

    #[error("singular linear system at omega = {omega} rad/s")]
    Singular { omega: f64 },

    #[error("simulation diverged at step {step}: variance ratio {ratio:e}")]
    Diverged { step: usize, ratio: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("series of {len} samples is too short for segment length {segment}")]
    SeriesTooShort { len: usize, segment: usize },

    #[error("invalid fit config: {0}")]
    InvalidFitConfig(String),

    #[error("normal equations remain singular under damping: {0}")]
    SingularNormalEquations(String),
}
