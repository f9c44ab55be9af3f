//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the fcr library.
#[derive(Debug, Error)]
pub enum FcrError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("curve is not aligned with the expected grid")]
    GridMismatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate covariance: no positive eigenvalues")]
    DegenerateCovariance,

    #[error("no signal: response is uncorrelated with every component score")]
    NoSignal,

    #[error("ridge objective has a pole at delta = {0}")]
    PoleAtDelta(f64),

    #[error("ridge solution undefined: response carries no weight on the leading eigenspace")]
    OrthogonalityViolation,

    #[error("saturated model: n = {n} leaves no residual degrees of freedom at p = {p}")]
    SaturatedModel { n: usize, p: usize },

    #[error("undefined objective: component score has zero variance")]
    UndefinedObjective,

    #[error("tuning failed: every candidate cell was infeasible")]
    TuningFailed,

    #[error("oracle refused: rank {rank} exceeds the tractable limit {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("invalid signal-to-noise configuration: the mean/coefficient inner product must be positive")]
    InvalidSnr,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data format: {0}")]
    DataFormat(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FcrError>;
