use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A physical or grid configuration that cannot be simulated.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("{}x{} crop window at offset ({}, {}) falls outside the {}x{} grid", window.0, window.1, offset.0, offset.1, grid.0, grid.1)]
    Range {
        offset: (i64, i64),
        window: (usize, usize),
        grid: (usize, usize),
    },

    #[error("numerical failure at iteration {iter}: {what}")]
    NumericalFailure { iter: usize, what: String },

    #[error("plan validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    PlanValidation(Vec<crate::optics::PlanViolation>),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("{}: {source}", path.display())]
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

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Problems decoding the binary and manifest file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("truncated header: expected {expected} bytes, found {found}")]
    TruncatedHeader { expected: usize, found: usize },

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this reader supports version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: usize, found: usize },

    #[error("zero-sized array ({rows}x{cols})")]
    EmptyArray { rows: u32, cols: u32 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("negative measurement value {value} at index {index}")]
    NegativeMeasurement { index: usize, value: f64 },

    #[error("manifest: {0}")]
    Manifest(String),
}
