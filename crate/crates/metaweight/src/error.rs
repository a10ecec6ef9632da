use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("length mismatch: expected {expected}, got {got} ({context})")]
    Length {
        expected: usize,
        got: usize,
        context: String,
    },
    #[error("empty batch: {0}")]
    EmptyBatch(String),
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("example is missing its correctness indicator")]
    MissingIndicator,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad magic number: expected {expected:#010x}, got {got:#010x}")]
    BadMagic { expected: u32, got: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
