use thiserror::Error;

/// Failure modes shared by every module of the crate.
///
/// Invalid parameter points are ordinary values here, not panics: MCMC
/// proposals routinely land outside the admissible region and are rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("invalid input: {0}")]
    Validation(String),
}

impl TrustError {
    pub fn domain(msg: impl Into<String>) -> Self {
        TrustError::Domain(msg.into())
    }
    pub fn decomposition(msg: impl Into<String>) -> Self {
        TrustError::Decomposition(msg.into())
    }
    pub fn constraint(msg: impl Into<String>) -> Self {
        TrustError::Constraint(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        TrustError::Numeric(msg.into())
    }
    pub fn validation(msg: impl Into<String>) -> Self {
        TrustError::Validation(msg.into())
    }

    /// True for errors that only mean "this parameter point is not admissible".
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            TrustError::Constraint(_) | TrustError::Decomposition(_) | TrustError::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, TrustError>;
