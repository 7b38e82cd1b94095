use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index} after jitter)")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error(
        "stationary covariance system is near a unit root (condition estimate {condition:.3e})"
    )]
    NearUnitRoot { condition: f64 },
    #[error("iteration failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("scale matrix is singular (diagonal entry {index} is {value:e})")]
    SingularScale { index: usize, value: f64 },
    #[error("singular linear system")]
    Singular,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("parameter slot {0} does not influence the loss")]
    DisconnectedParameter(usize),
    #[error("loss diverged at iteration {iteration}")]
    DivergedLoss { iteration: usize },
    #[error("numerical failure at training iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("forecast horizon must be at least 1")]
    HorizonZero,
    #[error("trend has {got} rows but the series needs {needed}")]
    TrendLengthMismatch { needed: usize, got: usize },
    #[error("APE undefined: actual value is zero")]
    ZeroActual,
    #[error("seasonal-difference scale is zero")]
    DegenerateScale,
    #[error("empty selection: {0}")]
    EmptySelection(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("gap in time index: t = {missing} is missing")]
    GapError { missing: i64 },
    #[error("no data rows")]
    EmptyData,
    #[error("series length T = {len} must exceed the lag order p = {p}")]
    TooShort { len: usize, p: usize },
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("archive error: {0}")]
    Archive(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::HorizonZero => ErrorClass::Usage,
            Error::LengthMismatch { .. }
            | Error::TrendLengthMismatch { .. }
            | Error::ParseError { .. }
            | Error::NonNumeric { .. }
            | Error::GapError { .. }
            | Error::EmptyData
            | Error::TooShort { .. }
            | Error::ZeroActual
            | Error::DegenerateScale
            | Error::EmptySelection(_)
            | Error::Open { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Archive(_) => ErrorClass::Data,
            Error::AtIteration { source, .. } => source.class(),
            _ => ErrorClass::Numeric,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
