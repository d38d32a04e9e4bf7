use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum CcsError {
    #[error("degenerate box ({x1}, {y1}, {x2}, {y2}): coordinates must be finite with x1 < x2 and y1 < y2")]
    DegenerateBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("detection score {0} outside [0, 1]")]
    InvalidScore(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema violation at record {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, CcsError>;
