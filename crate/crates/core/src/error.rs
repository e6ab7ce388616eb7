use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {column}: {value:?} is not a number")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("row {row}, column {column}: non-finite value")]
    NonFinite { row: usize, column: String },

    #[error("row {row}: label {value:?} is not one of +1, 1, -1, NA or empty")]
    BadLabel { row: usize, value: String },

    #[error("label column {0} not found")]
    MissingLabelColumn(String),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },

    #[error("need at least {min} rows, found {found}")]
    TooFewRows { min: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(u8),

    #[error("input is not centered (largest column mean {0:e})")]
    NotCentered(f64),

    #[error("background noise is zero: all entries are identical")]
    ZeroNoise,

    #[error("no feasible partition: {0}")]
    Infeasible(String),

    #[error("contradictory constraints: {0}")]
    ContradictoryConstraints(String),

    #[error("both classes are required: {0}")]
    SingleClass(String),

    #[error("penalty {penalty} zeroes every coefficient")]
    ZeroDirection { penalty: f64 },

    #[error("null distribution is empty")]
    EmptyNull,

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_replicate(self, replicate: usize) -> Error {
        Error::Replicate {
            replicate,
            source: Box::new(self),
        }
    }
}
