use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (max |m + m^T| = {deviation:e})")]
    NotSkewSymmetric { deviation: f64 },

    #[error("matrix is too far from SO(3) (Frobenius distance {distance:e})")]
    NotNearRotation { distance: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular flat output: thrust direction undefined (|acc + g e_z| = {magnitude:e})")]
    SingularReference { magnitude: f64 },

    #[error("desired payload force is degenerate (|F_d| = {magnitude:e})")]
    DegenerateCableDirection { magnitude: f64 },

    #[error("filters not warmed up ({samples} of {required} samples)")]
    FilterNotWarm { samples: usize, required: usize },

    #[error("sample times must be strictly increasing (index {index})")]
    UnsortedTimes { index: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("streams are misaligned: {0}")]
    Misaligned(String),

    #[error("linear system is singular or not positive definite: {0}")]
    Singular(&'static str),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
