use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimension {0} is not supported (expected 2, 4 or 8)")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix data has {actual} entries, expected {expected}")]
    BadDataLength { expected: usize, actual: usize },

    #[error("invalid wing identifier `{0}` (expected A, B or C)")]
    InvalidWing(String),

    #[error("sharpness {0} is outside (0, 1]")]
    SharpnessOutOfRange(f64),

    #[error("invalid Bloch direction: theta={theta}, phi={phi}")]
    InvalidDirection { theta: f64, phi: f64 },

    #[error("density matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("density matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("custom state: {0}")]
    CustomState(String),

    #[error("state file line {row}, column {col}: {msg}")]
    StateParse { row: usize, col: usize, msg: String },

    #[error("missing correlation term {0}")]
    MissingTerm(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("oracle enumeration refused for {0} observers (at most {max})", max = crate::cascade::ORACLE_MAX_OBSERVERS)]
    OracleTooLarge(usize),

    #[error("bisection did not converge within {iterations} iterations, bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("inequality value is not decreasing in sharpness (value at 0+: {at_zero}, at 1: {at_one})")]
    NotMonotone { at_zero: f64, at_one: f64 },

    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
}
