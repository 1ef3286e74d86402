use crate::active::ActiveError;
use crate::config::PriorError;
use crate::data::DataError;
use crate::decision::DecisionError;
use crate::gmm::GmmError;
use crate::grid::GridError;
use crate::prob::ProbError;
use std::path::PathBuf;
use thiserror::Error;

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: config, tables, data file contents.
    Validation,
    /// A computation failed on valid-looking input.
    Numeric,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Numeric => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl From<PriorError> for Error {
    fn from(e: PriorError) -> Self {
        match e {
            PriorError::Config(m) => Error::Config(m),
            PriorError::Gmm(g) => Error::Gmm(g),
        }
    }
}

fn gmm_kind(e: &GmmError) -> ErrorKind {
    match e {
        GmmError::NonPosDefResult { .. } | GmmError::NonPosDefScale { .. } => ErrorKind::Numeric,
        _ => ErrorKind::Validation,
    }
}

fn decision_kind(e: &DecisionError) -> ErrorKind {
    match e {
        DecisionError::NonConvergence(_) | DecisionError::Reducible { .. } => ErrorKind::Numeric,
        _ => ErrorKind::Validation,
    }
}

fn data_kind(e: &DataError) -> ErrorKind {
    match e {
        DataError::Io(_) => ErrorKind::Io,
        DataError::DegenerateCovariance(_) => ErrorKind::Numeric,
        _ => ErrorKind::Validation,
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::ConfigParse { .. } | Error::Prob(_) => ErrorKind::Validation,
            Error::Io { .. } => ErrorKind::Io,
            Error::Gmm(e) => gmm_kind(e),
            Error::Decision(e) => decision_kind(e),
            Error::Data(e) => data_kind(e),
            Error::Active(e) => match e {
                ActiveError::Gmm(g) => gmm_kind(g),
                ActiveError::Decision(d) => decision_kind(d),
                ActiveError::Data(d) => data_kind(d),
                ActiveError::ThreadPool(_) => ErrorKind::Io,
                _ => ErrorKind::Validation,
            },
            Error::Grid(e) => match e {
                GridError::Gmm(g) => gmm_kind(g),
                GridError::Decision(d) => decision_kind(d),
                _ => ErrorKind::Validation,
            },
        }
    }
}
