use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("query ({x}, {y}) lies outside the field extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no station pairs fall within the maximum lag of {max_lag} m")]
    EmptyVariogram { max_lag: f64 },

    #[error("kriging system is singular ({0})")]
    Singular(String),

    #[error("kriging failed at node ({x}, {y}): {source}")]
    AtNode {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid shapes differ: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
