use thiserror::Error;

/// Errors produced by model construction, training, pruning and data loading.
#[derive(Debug, Error)]
pub enum TskError {
    #[error("invalid membership function parameters: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {samples} samples for {clusters} clusters")]
    InsufficientData { samples: usize, clusters: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("index {index} out of range for {len} rules")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("load error at row {row}, column {column}: {message}")]
    Load {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("constant feature column {column} ({name}) has zero variance")]
    ZeroVariance { column: usize, name: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TskError>;
