use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid window: start {t0} is after end {t1}")]
    InvalidWindow { t0: f64, t1: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1..={max})", max = crate::lattice::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid offspring law: {0}")]
    InvalidOffspring(String),

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("parity configuration has odd weight; only even ball counts are supported (got k = {0})")]
    OddBallCount(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("truncated Poisson tail too heavy: mass {tail:e} beyond n_max = {n_max}")]
    TailTooHeavy { tail: f64, n_max: usize },

    #[error("point is not on the boundary of the box: {0}")]
    NotOnBoundary(String),

    #[error("event log covers [{log_start}, {log_end}] but the box needs [{need_start}, {need_end}]")]
    LogCoverage {
        log_start: f64,
        log_end: f64,
        need_start: f64,
        need_end: f64,
    },

    #[error("event log parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("quenched solver window too large: {sites} sites")]
    WindowTooLarge { sites: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
