use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid course outline: {0}")]
    Outline(String),

    #[error("event {request_id} has neither a user id nor a server session id")]
    Unattributable { request_id: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no data")]
    NoData,

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("actor sets differ between prediction and truth: {0}")]
    ActorMismatch(String),

    #[error("no catalog entry for indicator {indicator} in direction {direction}")]
    UnmappedFlag { indicator: String, direction: String },

    #[error("catalog data is invalid: {0}")]
    Catalog(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("{0} not found")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
