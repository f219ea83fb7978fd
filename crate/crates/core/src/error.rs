use std::path::PathBuf;

use phasebal_milp::MilpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("uncertainty set is {0}")]
    BadSet(&'static str),
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("solver returned {status} without a usable solution{context}")]
    Solver { status: String, context: String },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::Invalid(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> CoreError {
    CoreError::Dimension(msg.into())
}
