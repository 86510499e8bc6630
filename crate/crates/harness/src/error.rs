use std::path::PathBuf;

use gridcf::ce::CeError;
use gridcf::dataset::DatasetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("only {accepted} of {requested} feasible samples after {draws} draws")]
    TooManyInfeasible { requested: usize, accepted: usize, draws: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("dataset holds {found} samples but the case is a {expected} problem")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("solve failed while sampling: {0}")]
    Solve(String),
    #[error(transparent)]
    Ce(#[from] CeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
