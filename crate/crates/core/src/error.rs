use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("outcome `{0}` has no variation")]
    NoVariation(String),

    #[error("regressor matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("perfect separation detected: coefficient on `{0}` diverges")]
    Separation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("welfare undefined: coefficient on `{name}` is {value}, must be negative")]
    BidSign { name: String, value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("specification mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
