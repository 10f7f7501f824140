use thiserror::Error;

use crate::tensor::EntryIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by frontends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Divergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: index {index} outside dims {dims}")]
    OutOfRange {
        line: usize,
        index: EntryIndex,
        dims: crate::tensor::Dims,
    },

    #[error("line {line}: duplicate entry {index}")]
    Duplicate { line: usize, index: EntryIndex },

    #[error("tensor has no entries")]
    EmptyTensor,

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid model configuration: {0}")]
    InvalidModel(String),

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("index {index} outside model dims {dims}")]
    IndexOutOfRange {
        index: EntryIndex,
        dims: crate::tensor::Dims,
    },

    #[error("dimension mismatch: model {model}, data {data}")]
    DimensionMismatch {
        model: crate::tensor::Dims,
        data: crate::tensor::Dims,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("non-finite value during epoch {epoch} at observation {observation} ({index})")]
    Divergence {
        epoch: usize,
        observation: usize,
        index: EntryIndex,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidRatios(_)
            | Error::InvalidDims(_)
            | Error::InvalidModel(_)
            | Error::InvalidTrainConfig(_) => ErrorKind::Config,
            Error::Divergence { .. } => ErrorKind::Divergence,
            _ => ErrorKind::Data,
        }
    }
}
