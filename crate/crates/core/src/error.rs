use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants are grouped so the CLI can map them onto exit codes: bad
/// configuration, bad data, and numerical failures of a single fit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("non-numeric value {value:?} in column {column:?} (row {row})")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("target column {0:?} not found")]
    UnknownColumn(String),

    #[error("n < d: {n} rows for {d} features")]
    Underdetermined { n: usize, d: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("sketched Gram matrix is not positive definite after jitter escalation")]
    NotPositiveDefinite,

    #[error("privacy budget infeasible: {0}")]
    Infeasible(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors that should abort a single trial but not the sweep.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite)
    }

    /// True for errors caused by the input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::NonNumeric { .. }
                | Error::UnknownColumn(_)
                | Error::Underdetermined { .. }
                | Error::Degenerate(_)
                | Error::Dimension(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
