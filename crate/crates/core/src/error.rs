use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unreadable audio file {path}: {reason}")]
    Audio { path: PathBuf, reason: String },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("empty audio")]
    EmptyAudio,

    #[error("invalid audio clip: {0}")]
    InvalidClip(String),

    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),

    #[error("clip shorter than one frame ({samples} samples, frame needs {needed})")]
    ClipTooShort { samples: usize, needed: usize },

    #[error("malformed table: {0}")]
    Table(String),

    #[error("degenerate embedding set: {0}")]
    DegenerateEmbeddings(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
