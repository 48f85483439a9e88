use std::path::PathBuf;

use mixreg_core::Error as CoreError;
use mixreg_functional::FunctionalError;
use mixreg_harness::HarnessError;
use thiserror::Error;

/// CLI failure, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

fn core_is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::DegenerateCovariance
            | CoreError::SingularDesign { .. }
            | CoreError::ComponentCollapse { .. }
            | CoreError::DegenerateCluster { .. }
            | CoreError::FitFailed { .. }
            | CoreError::RankDeficient { .. }
            | CoreError::DegenerateResponse
    )
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if core_is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<FunctionalError> for CliError {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::Core(c) => c.into(),
            FunctionalError::RankDeficient { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Core(c) => c.into(),
            HarnessError::Functional(f) => f.into(),
            HarnessError::TooManyFailures { .. } => CliError::Numerical(e.to_string()),
            HarnessError::UnknownScenario(_) | HarnessError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
