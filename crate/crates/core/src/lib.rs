//! Mixture regression models with random covariates: joint mixture
//! regression (JMR), ordinary mixture regression (OMR) and Gaussian
//! mixtures, fitted by EM, plus prediction and MSPE evaluation.

pub mod em;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mspe;
pub mod predict;
pub mod rng;

pub use em::{
    fit, fit_gmm_covariate, fit_mbc, fit_ols, param_count, select_k, CandidateFit, FitConfig,
    FitResult, MbcFit, OlsFit, Responsibilities, Selection,
};
pub use error::{Error, Result};
pub use model::{loglik, mvn_logpdf, sample, Component, Dataset, Floors, Gaussian, MixtureModel, ModelKind, Regression};
pub use predict::{assign_cluster, posterior_weights, predict, threshold_filter, PredictionResult};
