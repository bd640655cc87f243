use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty batch: batch norm needs at least one row in train mode")]
    EmptyBatch,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("numeric divergence: state component {value} exceeds the {limit} bound")]
    Divergence { value: f64, limit: f64 },

    #[error("timestamps out of order: {next} does not follow {prev}")]
    Ordering { prev: i64, next: i64 },

    #[error("state error: {0}")]
    State(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("training diverged at batch {batch}: loss {loss}")]
    TrainingDiverged { batch: usize, loss: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
