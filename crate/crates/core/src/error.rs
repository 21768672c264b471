use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("{path}: {source}")]
    IoAt { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error(
        "empty training set: no training example has its target among the top-{k} candidates \
         (generator coverage {coverage:.4} over {examples} examples)"
    )]
    EmptyTrainingSet {
        k: usize,
        coverage: f64,
        examples: usize,
    },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: u64, loss: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    /// Coarse machine-readable class used by the command-line driver.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io(_) | Error::IoAt { .. } => "io",
            Error::UnsupportedFormat(_) => "format",
            Error::InvalidArgument(_) | Error::Config(_) => "config",
            Error::EmptyCorpus(_)
            | Error::EmptyTrainingSet { .. }
            | Error::Diverged { .. }
            | Error::NumericFailure(_) => "training",
            Error::Internal(_) => "internal",
        }
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::IoAt { path, source }
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(format!($($arg)*))
    };
}
pub(crate) use invalid;
