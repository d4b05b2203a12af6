use thiserror::Error;

/// Errors surfaced by problem construction and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("density value at row {row}, column {col} is invalid: {value}")]
    InvalidDensity { row: usize, col: usize, value: f64 },

    #[error("row {row} has no positive density; the log-likelihood is -inf for every p")]
    EmptyRow { row: usize },

    #[error("probability vector is invalid: {reason}")]
    InvalidProbabilityVector { reason: String },

    #[error("mixture density eta[{row}] underflowed ({value:e}); input is degenerate")]
    DegenerateEta { row: usize, value: f64 },

    #[error("waterfilling requires at least one positive slope, all S_j are zero")]
    ZeroSlopes,

    #[error("observation {index} has an invalid interval ({left}, {right}]")]
    InvalidInterval { index: usize, left: f64, right: f64 },

    #[error("observation {index} with interval ({left}, {right}] covers no grid mass")]
    EmptyObservation { index: usize, left: f64, right: f64 },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
