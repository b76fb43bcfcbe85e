use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed instance file; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario set: {0}")]
    Scenario(String),

    /// Carried weight exceeds the knapsack bound, so leg speeds are undefined.
    #[error("packed weight {weight} exceeds capacity {capacity}")]
    Overweight { weight: f64, capacity: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
