use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("subject {subject}: {have} observations, basis needs at least {need}")]
    InsufficientObservations { subject: String, have: usize, need: usize },
    #[error("subject {subject}: {reason}")]
    InvalidCurve { subject: String, reason: String },
    #[error("spline order {0} is not supported here")]
    InvalidOrder(usize),
    #[error("invalid knots: {0}")]
    InvalidKnots(String),
    #[error("requested {requested} components but the covariance has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("need at least {need} curves, got {have}")]
    TooFewCurves { have: usize, need: usize },
    #[error("evaluation grids differ")]
    GridMismatch,
    #[error("subject id mismatch at row {row}: expected {expected}, found {found}")]
    IdMismatch { row: usize, expected: String, found: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Core(#[from] mixreg_core::Error),
}

pub type Result<T, E = FunctionalError> = std::result::Result<T, E>;
