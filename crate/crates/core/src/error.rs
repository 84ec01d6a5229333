use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in block {block}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        block: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("block count mismatch: expected {expected}, found {found}")]
    BlockCount { expected: usize, found: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{0} is undefined at the zero vector")]
    ZeroVector(&'static str),

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),

    #[error("{routine} did not converge after {sweeps} sweeps")]
    NoConvergence { routine: &'static str, sweeps: usize },

    #[error("not separated: minimum output margin {q_min} is not positive")]
    NotSeparated { q_min: f64 },

    #[error("value {0} outside the domain of the inverse link")]
    OutOfRange(f64),

    #[error("dataset is empty")]
    EmptyData,

    #[error("dimension {d} exceeds the oracle limit of 3")]
    OracleDimension { d: usize },

    #[error("step counter overflow")]
    StepOverflow,
}

pub type Result<T> = std::result::Result<T, Error>;
