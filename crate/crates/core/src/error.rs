//! Crate-wide error type.

use crate::instance::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An instance file could not be read into the internal model.
    #[error("parse error: {0}")]
    Parse(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation that requires a valid instance received an invalid one.
    #[error("invalid instance: {0}")]
    Validation(ValidationReport),

    /// The LP solver failed to terminate within its iteration cap.
    #[error("solver error: {message} (after {iterations} iterations)")]
    Solver { message: String, iterations: usize },

    /// An exact computation would exceed its configured size budget.
    #[error("size budget exceeded: {message}")]
    SizeBudget { message: String },
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn size_budget(msg: impl Into<String>) -> Self {
        Error::SizeBudget {
            message: msg.into(),
        }
    }
}
