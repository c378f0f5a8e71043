use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("query norm {norm} exceeds ball radius {radius}")]
    QueryOutsideBall { norm: f64, radius: f64 },

    #[error("operation requires unit weights: {0}")]
    WeightedInput(&'static str),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
