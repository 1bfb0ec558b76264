use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: sample id must be non-empty")]
    EmptyId { line: usize },

    #[error("duplicate sample id `{id}`")]
    DuplicateId { id: String },

    #[error("sample `{sample}` is missing required feature `{field}`")]
    MissingField { sample: String, field: &'static str },

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("modularity is undefined on a graph without edges")]
    EdgelessGraph,

    #[error("dataset has no labeled samples")]
    NoLabeledSamples,

    #[error("cannot stratify into {k} folds: family `{family}` has only {count} labeled samples")]
    Stratification {
        family: String,
        count: usize,
        k: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("similarity tensor: {0}")]
    Tensor(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the pipeline.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::EmptyId { .. }
                | Error::DuplicateId { .. }
                | Error::MissingField { .. }
                | Error::Json(_)
        )
    }
}
