//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A record parsed but violates an invariant.
    #[error("validation error at line {line}: {msg}")]
    Validation { line: usize, msg: String },

    /// A metric was requested on an empty input.
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    /// A mention has no gazetteer candidates.
    #[error("no gazetteer candidates for mention {0:?}")]
    NoCandidate(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    TrainDiverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
