use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid column schema: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {what} of size {size}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("embedding dimension mismatch: file has {found}, table expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid tag {0:?}")]
    InvalidTag(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("sentence {sentence}: {message}")]
    Alignment { sentence: usize, message: String },

    #[error("archive: {0}")]
    Archive(String),

    #[error("archive format version {found} is not supported (expected major version {expected})")]
    ArchiveVersion { expected: u32, found: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
