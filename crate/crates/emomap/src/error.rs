use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum EmoError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown format '{0}'")]
    UnknownFormat(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("model file error at offset {offset}: {detail}")]
    ModelFormat { offset: u64, detail: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EmoError>;
