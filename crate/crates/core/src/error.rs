use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure in `{param}`: {detail}")]
    NumericFailure { param: String, detail: String },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("dataset is empty after filtering: {0}")]
    EmptyDataset(String),

    #[error("feature file format error (modality {modality:?}): {detail}")]
    Format {
        modality: Option<usize>,
        detail: String,
    },

    #[error("protocol order violated: {0}")]
    ProtocolOrder(String),

    #[error("protocol error from client {client}: {detail}")]
    Protocol { client: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("round {round}, {step}: {source}")]
    Round {
        round: usize,
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_round(self, round: usize, step: &'static str) -> Self {
        Error::Round {
            round,
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, with round context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Round { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
