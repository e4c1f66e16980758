use thiserror::Error;

/// Errors raised by the lattice, detector and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular channel: smallest singular value {smallest:e} <= {tolerance:e} x largest")]
    SingularChannel { smallest: f64, tolerance: f64 },

    #[error("invalid constellation size {0}: must be an even power of two (4, 16, 64, ...)")]
    InvalidConstellation(usize),

    #[error("invalid M schedule: {0}")]
    InvalidSchedule(String),

    #[error("exhaustive search over {size} hypotheses exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("no lattice point inside the search sphere")]
    EmptySphere,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
