use thiserror::Error;

/// Errors produced by the matrix core, the samplers and the attention layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum McaError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for McaError {
    fn from(err: std::io::Error) -> Self {
        McaError::Io(err.to_string())
    }
}

pub type Result<T, E = McaError> = std::result::Result<T, E>;
