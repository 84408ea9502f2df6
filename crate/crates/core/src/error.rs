use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cost matrix entry ({row},{col}) is non-finite or negative: {value}")]
    NonFiniteCost { row: usize, col: usize, value: f64 },

    #[error("numerical underflow: epsilon {epsilon:e} is too small for the cost scale")]
    NumericalUnderflow { epsilon: f64 },

    #[error("instance too large for the exact solver: {cells} cells (cap {cap})")]
    InstanceTooLarge { cells: usize, cap: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("zero-mass atom at index {0}; drop zero-mass atoms before solving")]
    ZeroMassAtom(usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("empty feature file: {0}")]
    EmptyFile(String),

    #[error("covariance undefined for class {label:?}: {count} sample(s), need at least 2")]
    CovarianceUndefined { label: String, count: usize },

    #[error("negative entry {value} at index {index}; power transform requires nonnegative input")]
    NegativeInput { index: usize, value: f64 },

    #[error("non-positive entry {value} at index {index}; log transform requires positive input")]
    LogOfNonPositive { index: usize, value: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("need at least 2 classes, got {0}")]
    InsufficientClasses(usize),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("zero-norm vector: {0}")]
    ZeroVector(String),

    #[error("covariance not positive semidefinite after jitter escalation")]
    CovarianceNotPD,

    #[error("not enough classes: need {needed}, have {have}")]
    NotEnoughClasses { needed: usize, have: usize },

    #[error("not enough samples in class {label:?}: need {needed}, have {have}")]
    NotEnoughSamples {
        label: String,
        needed: usize,
        have: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True when the error denotes bad user input (files, schemas, sizes)
    /// rather than a numerical failure. Drives the CLI exit-code contract.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NonFiniteCost { .. }
                | Error::InstanceTooLarge { .. }
                | Error::InvalidDistribution(_)
                | Error::Parse { .. }
                | Error::EmptyFile(_)
                | Error::CovarianceUndefined { .. }
                | Error::NegativeInput { .. }
                | Error::LogOfNonPositive { .. }
                | Error::Io { .. }
                | Error::SchemaMismatch(_)
                | Error::InsufficientClasses(_)
                | Error::NotEnoughClasses { .. }
                | Error::NotEnoughSamples { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
