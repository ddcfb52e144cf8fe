use std::path::PathBuf;

use gampsi_core::denoise::{CtError, FamilyError};
use gampsi_core::pooling::PoolingError;
use gampsi_core::regime::RegimeError;
use gampsi_core::sim::SimError;
use gampsi_core::GampError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}, field `{field}`: {msg}")]
    Schema {
        path: String,
        line: usize,
        field: String,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("dimension: {0}")]
    Dimension(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::Config(_) => 2,
            Error::Dimension(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io { .. } | Error::Format { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<PoolingError> for Error {
    fn from(e: PoolingError) -> Self {
        match e {
            PoolingError::Noise { .. } | PoolingError::Infeasible { .. } => Error::Config(e.to_string()),
            _ => Error::Dimension(e.to_string()),
        }
    }
}

impl From<GampError> for Error {
    fn from(e: GampError) -> Self {
        match e {
            GampError::Dimension(_) => Error::Dimension(e.to_string()),
            GampError::NonFinite { .. } => Error::Numeric(e.to_string()),
            GampError::Config(_) => Error::Config(e.to_string()),
        }
    }
}

impl From<CtError> for Error {
    fn from(e: CtError) -> Self {
        match e {
            CtError::StatusLength { .. } | CtError::Contact { .. } => Error::Dimension(e.to_string()),
            _ => Error::Config(e.to_string()),
        }
    }
}

impl From<FamilyError> for Error {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::Params { .. } | FamilyError::Bounds(_) => Error::Config(e.to_string()),
            _ => Error::Dimension(e.to_string()),
        }
    }
}

impl From<RegimeError> for Error {
    fn from(e: RegimeError) -> Self {
        match e {
            RegimeError::Config(_) => Error::Config(e.to_string()),
            RegimeError::Pooling(p) => p.into(),
            RegimeError::Gamp(g) => g.into(),
            RegimeError::Ct(c) => c.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
