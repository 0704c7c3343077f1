use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("knots must be strictly increasing with at least two entries: {0}")]
    InvalidKnots(String),

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("contractivity violated at interval {index}: {bound} (value {value})")]
    Contractivity {
        index: usize,
        bound: &'static str,
        value: f64,
    },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("x = {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("{requested} samples requested, memory cap is {cap}")]
    MemoryCap { requested: u128, cap: usize },

    #[error("systems do not share the same knots")]
    KnotMismatch,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no root found after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence {
        best_residual: f64,
        iterations: usize,
    },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cannot evaluate expression {expr:?}: {reason}")]
    Expression { expr: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("condition count is {found}, expected {expected}")]
    ConditionCount { expected: usize, found: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
