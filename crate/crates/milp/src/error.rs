use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("variable `{0}` is already registered")]
    DuplicateVariable(String),

    #[error("constraint `{0}` is already registered")]
    DuplicateConstraint(String),

    #[error("constraint `{row}` references unknown variable index {index}")]
    UnknownVariable { row: String, index: usize },

    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),

    #[error("instance has no variables")]
    Empty,

    #[error("bound override for variable {index} is invalid: [{lower}, {upper}]")]
    InvalidBound { index: usize, lower: f64, upper: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("simplex failed: {0}")]
    Numerical(String),

    #[error("MPS line {line}: {message}")]
    Mps { line: usize, message: String },

    #[error("name map: {0}")]
    NameMap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MilpError>;
