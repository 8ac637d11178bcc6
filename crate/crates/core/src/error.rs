use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("x and y lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },

    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),

    #[error("meta file references pair {0:?} but no matching pair file exists")]
    MissingPairFile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("featurization/model basis mismatch (expected {expected:016x}, found {found:016x})")]
    BasisMismatch { expected: u64, found: u64 },

    #[error("degenerate classes: {0}")]
    DegenerateClasses(String),

    #[error("pair {0:?} has no ground-truth label")]
    MissingLabel(String),

    #[error("IGCI undefined: {0}")]
    IgciUndefined(String),

    #[error("model format: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
