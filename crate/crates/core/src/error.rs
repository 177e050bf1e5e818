//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors produced by volume I/O, configuration and tracking.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("data length mismatch: header declares {expected} voxels, file has {actual}")]
    DataLengthMismatch { expected: usize, actual: usize },

    #[error("unsupported scalar type `{0}`")]
    UnsupportedScalarType(String),

    #[error("volume dimensions mismatch: {a:?} vs {b:?}")]
    DimsMismatch { a: [usize; 3], b: [usize; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("seed outside volume bounds")]
    SeedOutsideVolume,

    #[error("seed not on a vessel")]
    SeedNotOnVessel,

    #[error("empty mask has no surface")]
    EmptyMask,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
