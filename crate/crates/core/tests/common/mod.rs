#![allow(dead_code)]

use mixreg_core::{Component, Gaussian, MixtureModel, ModelKind, Regression};
use nalgebra::{DMatrix, DVector};

pub fn jmr_component(alpha: f64, beta: &[f64], sigma2: f64, mu: &[f64], cov: &[f64]) -> Component {
    let p = beta.len();
    Component::jmr(
        Regression::new(alpha, DVector::zeros(0), DVector::from_row_slice(beta), sigma2).unwrap(),
        Gaussian::new(DVector::from_row_slice(mu), DMatrix::from_row_slice(p, p, cov)).unwrap(),
    )
}

/// Two well separated groups: μ = ∓(2, 2), Σ = I, β = (1, 1) and (1, 2).
pub fn separated_model() -> MixtureModel {
    MixtureModel::new(
        ModelKind::Jmr,
        vec![0.6, 0.4],
        vec![
            jmr_component(0.0, &[1.0, 1.0], 0.09, &[-2.0, -2.0], &[1.0, 0.0, 0.0, 1.0]),
            jmr_component(0.0, &[1.0, 2.0], 0.09, &[2.0, 2.0], &[1.0, 0.0, 0.0, 1.0]),
        ],
    )
    .unwrap()
}

/// Identical standard-normal covariate laws, distinct regressions.
pub fn homogeneous_model() -> MixtureModel {
    MixtureModel::new(
        ModelKind::Jmr,
        vec![0.6, 0.4],
        vec![
            jmr_component(-3.0, &[1.0, -2.0], 0.09, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
            jmr_component(3.0, &[-1.0, 1.0], 0.09, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
        ],
    )
    .unwrap()
}

pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (y - mean).powi(2) / var
}

/// 2×2 Gaussian log-density by explicit inverse and determinant.
pub fn mvn2_logpdf(x: [f64; 2], mu: [f64; 2], s: [f64; 4]) -> f64 {
    let det = s[0] * s[3] - s[1] * s[2];
    let inv = [s[3] / det, -s[1] / det, -s[2] / det, s[0] / det];
    let r = [x[0] - mu[0], x[1] - mu[1]];
    let q = r[0] * (inv[0] * r[0] + inv[1] * r[1]) + r[1] * (inv[2] * r[0] + inv[3] * r[1]);
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
}
