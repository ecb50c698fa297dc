use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or mismatched shapes.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("geometry descriptor: {0}")]
    Descriptor(String),

    /// Exhaustive enumeration refused because the grid is too large.
    #[error("enumeration over {pixels} pixels exceeds the capacity of {max} pixels")]
    Capacity { pixels: usize, max: usize },

    /// Malformed file content.
    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("refusing to overwrite existing manifest {0} (use force)")]
    ManifestExists(PathBuf),

    #[error("no silhouette-equivalent pair found after {0} attempts")]
    NoPairFound(usize),

    /// An invariant that the theory guarantees did not hold.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
