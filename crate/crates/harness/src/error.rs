use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated IDX file, need {expected} bytes but found {found}")]
    TruncatedFile { path: PathBuf, expected: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid metric input: {0}")]
    Metric(String),
    #[error(transparent)]
    Core(#[from] minmax_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
