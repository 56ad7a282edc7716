use std::fmt;

use optospec_core::Error as CoreError;

/// Failure classes with a stable process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data (exit 2).
    Config(String),
    /// Drift matrix has an eigenvalue with non-negative real part (exit 3).
    Unstable(String),
    /// Fit stopped without meeting its tolerance (exit 4).
    NotConverged(String),
    /// I/O and everything else (exit 1).
    Other(anyhow::Error),
}

impl CliError {
    pub fn config(field: &str, reason: impl fmt::Display) -> Self {
        CliError::Config(format!("field `{field}`: {reason}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Unstable(m) => write!(f, "unstable parameters: {m}"),
            CliError::NotConverged(m) => write!(f, "fit did not converge: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Unstable { .. } => CliError::Unstable(e.to_string()),
            CoreError::InvalidParameter { .. }
            | CoreError::InvalidGrid(_)
            | CoreError::GridMismatch(_)
            | CoreError::InvalidSimConfig(_)
            | CoreError::SeriesTooShort { .. }
            | CoreError::InvalidFitConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
