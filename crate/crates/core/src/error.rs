use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid document {doc}: {reason}")]
    Document { doc: String, reason: String },

    #[error("invalid span for doc {doc}, coder {coder}, concept {concept}: {reason}")]
    Span {
        doc: String,
        coder: String,
        concept: String,
        reason: String,
    },

    #[error("invalid label sequence: {0}")]
    Labels(String),

    #[error("invalid IOB sequence: {0}")]
    Iob(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("kappa undefined: chance agreement is 1 while observed agreement is {observed}")]
    KappaUndefined { observed: f64 },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("model: {0}")]
    Model(String),

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
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
