use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ply parse error at byte {offset}: {message}")]
    Ply { offset: usize, message: String },

    #[error("camera manifest error: {0}")]
    Manifest(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} line {line}: {message}")]
    Record {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("unknown view id {0}")]
    UnknownView(u32),
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
