use thiserror::Error;

use crate::data::Orientation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The request itself is malformed (unknown column, bad spec, wrong grid).
    Config,
    /// The data violates a structural requirement.
    Data,
    /// A numerical procedure could not be carried out.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("grid orientation is {found}, method requires {expected}")]
    Orientation {
        expected: Orientation,
        found: Orientation,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("design matrix is rank deficient at term `{term}`")]
    Singular { term: String },

    #[error("{what}: need at least {needed}, found {found}")]
    TooFew {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("cell (group {group}, rep {rep}) failed: {source}")]
    Cell {
        group: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failures} of {nsim} replicates failed (limit is 0.1%); first failure: {first}")]
    StudyFailed {
        failures: usize,
        nsim: usize,
        first: String,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::UnknownColumn(_) | Error::InvalidSpec(_) | Error::Orientation { .. } => {
                ErrorKind::Config
            }
            Error::InvalidData(_) | Error::MissingValue { .. } => ErrorKind::Data,
            Error::Singular { .. } | Error::TooFew { .. } | Error::StudyFailed { .. } => {
                ErrorKind::Numerical
            }
            Error::Cell { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_cell(self, group: usize, rep: usize) -> Error {
        Error::Cell {
            group,
            rep,
            source: Box::new(self),
        }
    }
}
