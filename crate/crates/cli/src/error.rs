use thiserror::Error;
use trust_core::TrustError;

/// Failures of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, input files or parameter values (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed (exit code 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<TrustError> for CliError {
    fn from(e: TrustError) -> Self {
        match e {
            TrustError::Validation(_) | TrustError::Domain(_) | TrustError::Constraint(_) => {
                CliError::Validation(e.to_string())
            }
            TrustError::Numeric(_) | TrustError::Decomposition(_) | TrustError::Initialization(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("invalid JSON: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
