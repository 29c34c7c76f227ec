use thiserror::Error;

/// Errors raised by the estimators, solvers and I/O layer.
#[derive(Debug, Error)]
pub enum PenseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{what} did not converge within {iterations} iterations (last iterate {last})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    /// The residual M-scale is zero: at least n(1 - delta) observations are fitted exactly.
    #[error("exact fit: residual scale is zero")]
    ExactFit,

    #[error("degenerate preliminary estimate: {0}")]
    InvalidPreliminary(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PenseError>;

pub(crate) fn invalid_param(msg: impl Into<String>) -> PenseError {
    PenseError::InvalidParameter(msg.into())
}

pub(crate) fn invalid_data(msg: impl Into<String>) -> PenseError {
    PenseError::InvalidData(msg.into())
}
