use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
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

    #[error("{file}: missing required column `{column}`")]
    Schema { file: String, column: String },

    #[error("{file}:{row}: {message}")]
    Row {
        file: String,
        row: u64,
        message: String,
    },

    #[error("{file}:{row}: admission_id `{admission_id}` not present in admissions.csv")]
    Referential {
        file: String,
        row: u64,
        admission_id: String,
    },

    #[error("labels contain a single class ({positives} positive, {negatives} negative); need at least one of each")]
    SingleClass { positives: usize, negatives: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("constant sample: {0}")]
    ConstantSample(&'static str),

    #[error("group `{group}` has no treated admissions for {treatment}")]
    UntreatedGroup { group: String, treatment: String },

    #[error("missing severity rows for {} admission(s): {}", .0.len(), .0.join(", "))]
    MissingSeverity(Vec<String>),

    #[error("cohort `{cohort}` contains admission `{admission_id}` with race outside {{white, black}}")]
    RaceOutsideCohort { cohort: String, admission_id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

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

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
