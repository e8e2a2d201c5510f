use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Messages are self-contained: each variant's text already includes the
/// message of whatever it wraps, so none of them expose a `source()`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("csv: {0}")]
    Csv(csv::Error),

    #[error("json: {0}")]
    Json(serde_json::Error),

    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: label {value:?} is not 0 or 1")]
    InvalidLabel { row: usize, value: String },

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("column {0:?} requested more than once")]
    DuplicateColumn(String),

    #[error("column {0:?} holds non-numeric values")]
    NonNumericColumn(String),

    #[error("no feature columns selected")]
    EmptySelection,

    #[error("column {0:?} is constant")]
    ConstantColumn(String),

    #[error("column {0:?} has no present values")]
    AllMissing(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("cannot split {n} samples into {k} folds")]
    InvalidFoldCount { n: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: String,
        range: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all firing strengths are zero")]
    ZeroFiringStrength,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training set contains a single class")]
    SingleClass,

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("image: {0}")]
    Image(String),

    #[error("unknown format {0:?}")]
    UnknownFormat(String),

    #[error("{context}: {inner}")]
    Context { context: String, inner: Box<Error> },
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause: source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            inner: Box::new(self),
        }
    }
}
