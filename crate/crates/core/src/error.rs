use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: missing header line")]
    MissingHeader { path: PathBuf },

    #[error("clip {clip_id}: {field} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        clip_id: String,
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("duplicate clip_id {0}")]
    DuplicateClip(String),

    #[error("unknown clip_id {0}")]
    UnknownClip(String),

    #[error("clip {clip_id}: {message}")]
    InvalidRecord { clip_id: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("vote count {0}: consensus requires exactly 7 votes")]
    VoteCount(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    Precondition(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error")]
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
