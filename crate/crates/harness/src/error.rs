use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario {0}; expected 1..=4")]
    UnknownScenario(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{failed} of {total} replicates failed (limit {limit:.0}%)")]
    TooManyFailures { failed: usize, total: usize, limit: f64 },
    #[error("label {label} at position {index} is outside 0..{k}")]
    LabelOutOfRange { index: usize, label: usize, k: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("{n} subjects, need at least {need} for leave-one-out")]
    TooFewSubjects { n: usize, need: usize },
    #[error("scenario fixture: {0}")]
    Fixture(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] mixreg_core::Error),
    #[error(transparent)]
    Functional(#[from] mixreg_functional::FunctionalError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
