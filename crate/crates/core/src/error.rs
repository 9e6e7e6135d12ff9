use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BaiError>;

#[derive(Debug, Error)]
pub enum BaiError {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A target value cannot be reached (e.g. beyond an asymptote).
    #[error("range error: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The instance has no unique best arm, so the characteristic time is infinite.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// The environment's pull cap would be exceeded. Carries the accounting at abort time.
    #[error("pull cap of {cap} exhausted after {samples} samples in {batches} batches")]
    Exhausted { cap: u64, samples: u64, batches: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl BaiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BaiError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        BaiError::Csv {
            path: path.into(),
            source,
        }
    }
}
