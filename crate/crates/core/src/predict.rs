//! Posterior membership weights, the empirical best predictor, hard
//! clustering and posterior-threshold subsetting.

use nalgebra::{DMatrix, DVector};

use crate::em::argmax;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::model::{MixtureModel, ModelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub yhat: f64,
    pub posteriors: DVector<f64>,
    pub top_component: usize,
    pub top_posterior: f64,
}

fn check_x(m: &MixtureModel, x: &DVector<f64>) -> Result<()> {
    if x.len() != m.p() {
        return Err(Error::DimensionMismatch(format!(
            "model has p={}, covariate has length {}",
            m.p(),
            x.len()
        )));
    }
    Ok(())
}

fn check_z<'a>(m: &MixtureModel, z: Option<&'a DVector<f64>>) -> Result<&'a [f64]> {
    let z: &[f64] = z.map_or(&[], |v| v.as_slice());
    if z.len() != m.q() {
        return Err(Error::DimensionMismatch(format!(
            "model has q={}, invariant covariate has length {}",
            m.q(),
            z.len()
        )));
    }
    Ok(z)
}

/// Posterior membership probabilities p̂_k(x) from the covariate laws.
/// Models without covariate laws (OMR) return the mixing proportions.
pub fn posterior_weights(m: &MixtureModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_x(m, x)?;
    if !m.kind().has_covariate() {
        return Ok(DVector::from_row_slice(m.weights()));
    }
    let logs: Vec<f64> = m
        .components()
        .iter()
        .zip(m.weights())
        .map(|(c, w)| w.ln() + c.covariate.as_ref().expect("covariate law").log_density(x.as_slice()))
        .collect();
    let lse = log_sum_exp(&logs);
    if !lse.is_finite() {
        return Err(Error::NonFinite("posterior normalizer".into()));
    }
    Ok(DVector::from_iterator(logs.len(), logs.iter().map(|l| (l - lse).exp())))
}

/// Empirical best predictor Σ_k p̂_k(x)(α̂_k + ζ̂_kᵀz + β̂_kᵀx).
pub fn predict(m: &MixtureModel, x: &DVector<f64>, z: Option<&DVector<f64>>) -> Result<PredictionResult> {
    if !m.kind().has_regression() {
        return Err(Error::Unsupported("covariate-only model has no regression".into()));
    }
    let zs = check_z(m, z)?;
    let posteriors = posterior_weights(m, x)?;
    let yhat = m
        .components()
        .iter()
        .zip(posteriors.iter())
        .map(|(c, w)| w * c.regression.as_ref().expect("regression").mean(x.as_slice(), zs))
        .sum();
    let top_component = argmax(posteriors.iter().copied());
    let top_posterior = posteriors[top_component];
    Ok(PredictionResult {
        yhat,
        posteriors,
        top_component,
        top_posterior,
    })
}

/// Component maximizing π̂_k f̂_k(y, x | z); ties go to the smaller index.
pub fn assign_cluster(m: &MixtureModel, x: &DVector<f64>, y: f64, z: Option<&DVector<f64>>) -> Result<usize> {
    check_x(m, x)?;
    let zs = if m.kind() == ModelKind::Gmm { &[][..] } else { check_z(m, z)? };
    let scores = m
        .components()
        .iter()
        .zip(m.weights())
        .map(|(c, w)| w.ln() + c.log_density(y, x.as_slice(), zs));
    Ok(argmax(scores))
}

/// Rows whose largest posterior is at least `t`, for `t ∈ [0.5, 1)`.
pub fn threshold_filter(posteriors: &DMatrix<f64>, t: f64) -> Result<Vec<bool>> {
    if !(0.5..1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("threshold {t} outside [0.5, 1)")));
    }
    Ok(posteriors
        .row_iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= t)
        .collect())
}
