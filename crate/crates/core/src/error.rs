use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("events from more than one home: {first} and {other}")]
    MixedHomes { first: String, other: String },

    #[error("node `{0}` is not part of the configured node set")]
    UnknownNode(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("non-finite value after layer {layer}: {detail}")]
    NonFinite { layer: usize, detail: String },

    #[error("class {0} has no training samples")]
    MissingClass(&'static str),

    #[error("classifier `{0}` exposes no feature importance")]
    NoImportance(&'static str),

    #[error("missing statistics for channel `{0}`")]
    MissingChannel(String),

    #[error("unsupported format `{0}`")]
    UnknownFormat(String),

    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            detail: detail.to_string(),
        }
    }
}
