use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the toolkit.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto data, parameter and numeric failure classes via [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("duplicate row id `{0}`")]
    DuplicateRow(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row `{row}`, column `{column}`: cannot use value `{value}` ({reason})")]
    BadCell {
        row: String,
        column: String,
        value: String,
        reason: &'static str,
    },

    #[error("malformed table: {0}")]
    Malformed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {needed} clusters after removing noise, found {found}")]
    TooFewClusters { needed: usize, found: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no grid candidate satisfied the selection constraints ({rows} rows scored)")]
    NoCandidate {
        rows: usize,
        report: Box<crate::select::SweepReport>,
    },
}

/// Coarse error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Parameter,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::DuplicateColumn(_)
            | Error::DuplicateRow(_)
            | Error::MissingColumn(_)
            | Error::BadCell { .. }
            | Error::Malformed(_)
            | Error::DimensionMismatch { .. } => ErrorKind::Data,
            Error::InvalidParameter(_) => ErrorKind::Parameter,
            Error::TooFewClusters { .. } | Error::Numeric(_) | Error::NoCandidate { .. } => {
                ErrorKind::Numeric
            }
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
