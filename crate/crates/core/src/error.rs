use thiserror::Error;

/// Errors raised by model construction, estimation and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance matrix is not positive definite after regularization")]
    DegenerateCovariance,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("weighted design matrix is singular (component {component})")]
    SingularDesign { component: usize },

    #[error("component {component} collapsed: effective weight {weight:.4} below {min:.4}")]
    ComponentCollapse {
        component: usize,
        weight: f64,
        min: f64,
    },

    #[error("cluster {cluster} has {size} points, need at least {min}")]
    DegenerateCluster {
        cluster: usize,
        size: usize,
        min: usize,
    },

    #[error("all {restarts} restarts failed; last error: {last}")]
    FitFailed { restarts: usize, last: Box<Error> },

    #[error("requested {requested} components but numerical rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("response has zero variance; mixture regression is degenerate")]
    DegenerateResponse,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
