//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("size mismatch for {path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("ragged CSV row {row}: expected {expected} fields, found {actual}")]
    RaggedRows {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid superpixel label {0}")]
    InvalidLabel(usize),

    #[error("empty distance vector")]
    EmptyVector,

    #[error("empty segmentation mask")]
    EmptyMask,

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("refinement sizes must be strictly decreasing: {0}")]
    NonDecreasingSigmas(String),

    #[error("reference abundances have zero energy")]
    ZeroSignal,

    #[error("endmember index out of range: {index} >= {count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
