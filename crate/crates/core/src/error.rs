use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HotError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range for dimension {dim} of size {size}")]
    Bounds { dim: usize, index: i64, size: usize },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid graph: {0}")]
    Validation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = HotError> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HotError::Shape(msg.into()))
}
