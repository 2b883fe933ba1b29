use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate page title {title:?} (line {line})")]
    DuplicatePage { title: String, line: usize },

    #[error("row {row}: expected 3 tab-separated fields, found {found}")]
    TripletFormat { row: usize, found: usize },

    #[error("invalid graph file: {0}")]
    GraphFormat(String),

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("need {needed} eligible entities, graph has {available}")]
    InsufficientEntities { needed: usize, available: usize },

    #[error("entity {entity} and its neighbours supply {available} passages, need {needed}")]
    InsufficientPassages {
        entity: u32,
        needed: usize,
        available: usize,
    },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid answer span [{start}, {end}] for passage of length {len}")]
    InvalidSpan { start: usize, end: usize, len: usize },

    #[error("non-finite loss at epoch {epoch} step {step}; offending batch: {dump}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        dump: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
