use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, layer stacks or configuration values that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid labels, out-of-range values or inconsistent records.
    #[error("data error: {0}")]
    Data(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("split error: {0}")]
    Split(String),
    /// Training could not proceed, e.g. a single-class training set.
    #[error("training error: {0}")]
    Training(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("routing error: {0}")]
    Routing(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
