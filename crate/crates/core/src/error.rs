use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation cap I = {cap} reached with captured weight {captured:.3e} (need 1 - {epsilon:e})")]
    TruncationFailure { cap: u32, captured: f64, epsilon: f64 },

    #[error("energy model has no level for I = {0}")]
    MissingLevel(u32),

    #[error("degenerate spectrum: |E''| = {0:e} at the mean angular momentum, revival time undefined")]
    DegenerateSpectrum(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported energy model: {0}")]
    UnsupportedModel(String),

    #[error("invalid wave-packet pair: {0}")]
    InvalidPair(String),

    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),

    #[error("empty wave packet: total weight is zero")]
    EmptyPacket,

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the physics.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
