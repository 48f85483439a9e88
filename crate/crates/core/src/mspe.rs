//! Monte-Carlo evaluation of the asymptotic mean squared prediction error
//! of mixture predictors under a known JMR population model.
//!
//! Every excess term has the form `E_X[Σ_k p_k(X) (e_k(X) − c(X))²]` where
//! `p_k(X) = E(δ_k | X)`, `e_k(X) = α_k + β_kᵀX` and `c(X)` is the
//! predictor's centre:
//!
//! * adaptive: `c = Σ_ℓ p_ℓ(X) e_ℓ(X)` (posterior weights),
//! * fixed: `c = Σ_ℓ w_ℓ e_ℓ(X)` (constant weights, e.g. π),
//! * biased: `c = Σ_ℓ π*_ℓ e*_ℓ(X)` (limit of an inconsistent estimator).
//!
//! Intercepts are carried by augmenting `X` with a constant coordinate. All
//! three estimators share the same X draws for a given seed, so differences
//! are paired.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{draw_category, MixtureModel, ModelKind};
use crate::predict::posterior_weights;
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_MC_N: usize = 200_000;
const MIN_MC_N: usize = 100;
const CHUNK: usize = 8_192;

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Limiting values (β*, π*) of a possibly inconsistent estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedLimit {
    pub pi_star: Vec<f64>,
    /// Per-component coefficients: either `p` slopes (the intercept then
    /// stays at the true α_ℓ) or `p + 1` values with the intercept first.
    pub beta_star: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MspeReport {
    /// Σ̄ = Σ_k π_k σ_k², exact.
    pub sigma_bar: f64,
    pub excess_adaptive: McEstimate,
    pub excess_fixed: McEstimate,
    pub excess_biased: Option<McEstimate>,
    pub mc_n: usize,
}

/// Intercept-augmented coefficients (α_k, β_k) of a JMR model.
fn augmented_coefs(m: &MixtureModel) -> Vec<DVector<f64>> {
    m.components()
        .iter()
        .map(|c| {
            let r = c.regression.as_ref().expect("JMR regression");
            let mut v = Vec::with_capacity(1 + r.beta.len());
            v.push(r.alpha);
            v.extend(r.beta.iter());
            DVector::from_vec(v)
        })
        .collect()
}

fn check_jmr(m: &MixtureModel) -> Result<()> {
    if m.kind() != ModelKind::Jmr {
        return Err(Error::Unsupported("MSPE evaluation needs a JMR population model".into()));
    }
    if m.q() > 0 {
        return Err(Error::Unsupported("MSPE evaluation with invariant covariates".into()));
    }
    Ok(())
}

fn check_mc_n(mc_n: usize) -> Result<()> {
    if mc_n < MIN_MC_N {
        return Err(Error::InvalidParameter(format!("mc_n must be at least {MIN_MC_N}, got {mc_n}")));
    }
    Ok(())
}

fn check_probability(w: &[f64], k: usize, what: &str) -> Result<()> {
    if w.len() != k {
        return Err(Error::DimensionMismatch(format!("{what} has length {}, K={k}", w.len())));
    }
    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("{what} is not a probability vector")));
    }
    Ok(())
}

fn augment_limit(m: &MixtureModel, limit: &BiasedLimit) -> Result<Vec<DVector<f64>>> {
    let k = m.k();
    let p = m.p();
    check_probability(&limit.pi_star, k, "pi_star")?;
    if limit.beta_star.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "beta_star has {} vectors, K={k}",
            limit.beta_star.len()
        )));
    }
    let truth = augmented_coefs(m);
    limit
        .beta_star
        .iter()
        .zip(&truth)
        .map(|(b, t)| {
            if b.len() == p + 1 {
                Ok(b.clone())
            } else if b.len() == p {
                let mut v = vec![t[0]];
                v.extend(b.iter());
                Ok(DVector::from_vec(v))
            } else {
                Err(Error::DimensionMismatch(format!(
                    "beta_star entry has length {}, expected {p} or {}",
                    b.len(),
                    p + 1
                )))
            }
        })
        .collect()
}

/// Running sums for several per-draw statistics.
#[derive(Clone)]
struct Moments {
    n: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Moments {
    fn new(width: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; width],
            sumsq: vec![0.0; width],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.n += 1;
        for (i, x) in v.iter().enumerate() {
            self.sum[i] += x;
            self.sumsq[i] += x * x;
        }
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
        }
    }

    fn estimate(&self, i: usize) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum[i] / n;
        let var = ((self.sumsq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        McEstimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

/// Per-draw statistics: [adaptive, fixed, biased, fixed − adaptive, biased − fixed].
fn simulate(
    m: &MixtureModel,
    fixed_weights: &[f64],
    biased: Option<(&[f64], &[DVector<f64>])>,
    mc_n: usize,
    seed: u64,
) -> Result<Moments> {
    let coefs = augmented_coefs(m);
    let k = m.k();
    // pairwise coefficient gaps, so equal slopes give exact zeros
    let gaps: Vec<Vec<DVector<f64>>> = coefs.iter().map(|a| coefs.iter().map(|b| a - b).collect()).collect();
    let star_gaps: Option<Vec<Vec<DVector<f64>>>> =
        biased.map(|(_, star)| coefs.iter().map(|a| star.iter().map(|b| a - b).collect()).collect());
    let n_chunks = mc_n.div_ceil(CHUNK);
    let partials: Vec<Result<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let len = CHUNK.min(mc_n - c * CHUNK);
            let mut acc = Moments::new(5);
            let mut d = vec![0.0; k * k];
            let mut ds = vec![0.0; k * k];
            let mut xa = vec![1.0; m.p() + 1];
            let dot = |v: &DVector<f64>, x: &[f64]| -> f64 { v.iter().zip(x).map(|(a, b)| a * b).sum() };
            for _ in 0..len {
                let comp = draw_category(m.weights(), &mut rng);
                let x = m.component(comp).covariate.as_ref().expect("JMR law").draw(&mut rng);
                xa[1..].copy_from_slice(x.as_slice());
                let post = posterior_weights(m, &x)?;
                for i in 0..k {
                    for j in 0..k {
                        d[i * k + j] = dot(&gaps[i][j], &xa);
                    }
                }
                // Σ_k p_k (Σ_ℓ w_ℓ g_kℓ)²
                let spread = |w: &[f64], g: &[f64]| -> f64 {
                    (0..k)
                        .map(|i| {
                            let inner: f64 = (0..k).map(|j| w[j] * g[i * k + j]).sum();
                            post[i] * inner * inner
                        })
                        .sum()
                };
                let a = spread(post.as_slice(), &d);
                let f = spread(fixed_weights, &d);
                let b = match (biased, &star_gaps) {
                    (Some((pi_star, _)), Some(sg)) => {
                        for i in 0..k {
                            for j in 0..k {
                                ds[i * k + j] = dot(&sg[i][j], &xa);
                            }
                        }
                        spread(pi_star, &ds)
                    }
                    _ => 0.0,
                };
                acc.push(&[a, f, b, f - a, b - f]);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::new(5);
    for part in partials {
        total.merge(&part?);
    }
    Ok(total)
}

/// Σ̄ = Σ_k π_k σ_k².
pub fn sigma_bar(m: &MixtureModel) -> f64 {
    m.components()
        .iter()
        .zip(m.weights())
        .map(|(c, w)| w * c.regression.as_ref().map_or(0.0, |r| r.sigma2))
        .sum()
}

/// Excess MSPE of the posterior-weighted (population best) predictor.
pub fn mspe_adaptive(m: &MixtureModel, mc_n: usize, seed: u64) -> Result<McEstimate> {
    check_jmr(m)?;
    check_mc_n(mc_n)?;
    Ok(simulate(m, m.weights(), None, mc_n, seed)?.estimate(0))
}

/// Excess MSPE when the posterior weights are replaced by fixed `weights`.
pub fn mspe_fixed(m: &MixtureModel, weights: &[f64], mc_n: usize, seed: u64) -> Result<McEstimate> {
    check_jmr(m)?;
    check_mc_n(mc_n)?;
    check_probability(weights, m.k(), "weights")?;
    Ok(simulate(m, weights, None, mc_n, seed)?.estimate(1))
}

/// Excess MSPE of the fixed-weight predictor built from biased limits.
pub fn mspe_biased(m: &MixtureModel, limit: &BiasedLimit, mc_n: usize, seed: u64) -> Result<McEstimate> {
    check_jmr(m)?;
    check_mc_n(mc_n)?;
    let star = augment_limit(m, limit)?;
    Ok(simulate(m, m.weights(), Some((&limit.pi_star, &star)), mc_n, seed)?.estimate(2))
}

/// All three excess terms from one set of paired draws.
pub fn mspe_report(m: &MixtureModel, limit: Option<&BiasedLimit>, mc_n: usize, seed: u64) -> Result<MspeReport> {
    check_jmr(m)?;
    check_mc_n(mc_n)?;
    let star = limit.map(|l| augment_limit(m, l)).transpose()?;
    let biased = limit.zip(star.as_ref()).map(|(l, s)| (l.pi_star.as_slice(), s.as_slice()));
    let mom = simulate(m, m.weights(), biased, mc_n, seed)?;
    Ok(MspeReport {
        sigma_bar: sigma_bar(m),
        excess_adaptive: mom.estimate(0),
        excess_fixed: mom.estimate(1),
        excess_biased: limit.map(|_| mom.estimate(2)),
        mc_n,
    })
}

/// Intercept-augmented second moment E[x̄x̄ᵀ] of component `k`.
pub fn second_moment(m: &MixtureModel, k: usize) -> DMatrix<f64> {
    let law = m.component(k).covariate.as_ref().expect("covariate law");
    let p = law.dim();
    let mu = law.mean();
    let mut g = DMatrix::zeros(p + 1, p + 1);
    g[(0, 0)] = 1.0;
    for a in 0..p {
        g[(0, a + 1)] = mu[a];
        g[(a + 1, 0)] = mu[a];
        for b in 0..p {
            g[(a + 1, b + 1)] = law.cov()[(a, b)] + mu[a] * mu[b];
        }
    }
    g
}

/// True when every component has the same augmented second moment.
pub fn equal_second_moments(m: &MixtureModel) -> bool {
    let g0 = second_moment(m, 0);
    let scale = g0.norm().max(1.0);
    (1..m.k()).all(|k| (second_moment(m, k) - &g0).norm() <= 1e-12 * scale)
}

/// Closed form of the fixed-weight excess: Σ_k π_k v_kᵀ Γ_k v_k with
/// `v_k = β̄_k − Σ_ℓ w_ℓ β̄_ℓ`.
pub fn fixed_excess_exact(m: &MixtureModel, weights: &[f64]) -> Result<f64> {
    check_jmr(m)?;
    check_probability(weights, m.k(), "weights")?;
    let coefs = augmented_coefs(m);
    let centre = coefs.iter().zip(weights).fold(DVector::zeros(m.p() + 1), |acc, (c, w)| acc + c * *w);
    Ok((0..m.k())
        .map(|k| {
            let v = &coefs[k] - &centre;
            m.weights()[k] * (v.transpose() * second_moment(m, k) * &v)[(0, 0)]
        })
        .sum())
}

/// Closed form of the biased excess: Σ_k π_k u_kᵀ Γ_k u_k with
/// `u_k = Σ_ℓ π*_ℓ (β̄_k − β̄*_ℓ)`.
pub fn biased_excess_exact(m: &MixtureModel, limit: &BiasedLimit) -> Result<f64> {
    check_jmr(m)?;
    let star = augment_limit(m, limit)?;
    let coefs = augmented_coefs(m);
    let centre = star
        .iter()
        .zip(&limit.pi_star)
        .fold(DVector::zeros(m.p() + 1), |acc, (c, w)| acc + c * *w);
    Ok((0..m.k())
        .map(|k| {
            let u = &coefs[k] - &centre;
            m.weights()[k] * (u.transpose() * second_moment(m, k) * &u)[(0, 0)]
        })
        .sum())
}

/// The quadratic form `vᵀΓv` equal to (biased − fixed) under equal second
/// moments, with `v = Σ_{ℓ<K} (π*_ℓ − π_ℓ)(β̄_K − β̄_ℓ) + B` and
/// `B = Σ_ℓ π*_ℓ (β̄_ℓ − β̄*_ℓ)`. Evaluated as ‖Lᵀv‖² so the result is a
/// sum of squares.
pub fn bias_quadratic_form(m: &MixtureModel, limit: &BiasedLimit, gamma: &DMatrix<f64>) -> Result<f64> {
    check_jmr(m)?;
    let star = augment_limit(m, limit)?;
    let coefs = augmented_coefs(m);
    let k = m.k();
    let dim = m.p() + 1;
    if gamma.nrows() != dim || gamma.ncols() != dim {
        return Err(Error::DimensionMismatch(format!("gamma must be {dim}x{dim}")));
    }
    let last = &coefs[k - 1];
    let mut v = DVector::zeros(dim);
    for l in 0..k - 1 {
        v += (last - &coefs[l]) * (limit.pi_star[l] - m.weights()[l]);
    }
    for l in 0..k {
        v += (&coefs[l] - &star[l]) * limit.pi_star[l];
    }
    let chol = Cholesky::new(gamma.clone()).ok_or(Error::DegenerateCovariance)?;
    Ok((chol.l().transpose() * v).norm_squared())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasedCheck {
    pub limit: BiasedLimit,
    pub biased: McEstimate,
    pub biased_minus_fixed: McEstimate,
    /// biased ≥ fixed − 3·combined SE.
    pub holds: bool,
    pub quadratic_form: f64,
    pub quadratic_form_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub report: MspeReport,
    pub fixed_minus_adaptive: McEstimate,
    /// sqrt(SE_fixed² + SE_adaptive²).
    pub combined_se: f64,
    /// fixed ≥ adaptive − 3·combined SE.
    pub fixed_dominates: bool,
    /// fixed − adaptive > 3·combined SE.
    pub strict: bool,
    pub equal_moments: bool,
    pub biased: Option<BiasedCheck>,
}

/// A default biased limit: slopes shifted by 0.25 and π* pulled halfway to uniform.
pub fn default_perturbation(m: &MixtureModel) -> BiasedLimit {
    let k = m.k() as f64;
    BiasedLimit {
        pi_star: m.weights().iter().map(|w| 0.5 * w + 0.5 / k).collect(),
        beta_star: m
            .components()
            .iter()
            .map(|c| c.regression.as_ref().expect("regression").beta.add_scalar(0.25))
            .collect(),
    }
}

/// Checks that adaptive weighting never loses to fixed weights and, under
/// equal second moments, that a biased limit never beats the consistent
/// fixed-weight predictor.
pub fn verify_dominance(
    m: &MixtureModel,
    limit: Option<&BiasedLimit>,
    mc_n: usize,
    seed: u64,
) -> Result<DominanceReport> {
    check_jmr(m)?;
    check_mc_n(mc_n)?;
    let equal_moments = equal_second_moments(m);
    let limit = match (limit, equal_moments) {
        (Some(l), true) => Some(l.clone()),
        (None, true) => Some(default_perturbation(m)),
        (_, false) => None,
    };
    let star = limit.as_ref().map(|l| augment_limit(m, l)).transpose()?;
    let biased_arg = limit.as_ref().zip(star.as_ref()).map(|(l, s)| (l.pi_star.as_slice(), s.as_slice()));
    let mom = simulate(m, m.weights(), biased_arg, mc_n, seed)?;
    let adaptive = mom.estimate(0);
    let fixed = mom.estimate(1);
    let combined_se = (adaptive.std_error.powi(2) + fixed.std_error.powi(2)).sqrt();
    let fixed_minus_adaptive = mom.estimate(3);
    let biased = match limit {
        Some(limit) => {
            let b = mom.estimate(2);
            let se = (b.std_error.powi(2) + fixed.std_error.powi(2)).sqrt();
            let quadratic_form = bias_quadratic_form(m, &limit, &second_moment(m, 0))?;
            let quadratic_form_exact = biased_excess_exact(m, &limit)? - fixed_excess_exact(m, m.weights())?;
            Some(BiasedCheck {
                biased: b,
                biased_minus_fixed: mom.estimate(4),
                holds: b.mean >= fixed.mean - 3.0 * se,
                quadratic_form,
                quadratic_form_exact,
                limit,
            })
        }
        None => None,
    };
    Ok(DominanceReport {
        report: MspeReport {
            sigma_bar: sigma_bar(m),
            excess_adaptive: adaptive,
            excess_fixed: fixed,
            excess_biased: biased.as_ref().map(|b| b.biased),
            mc_n,
        },
        fixed_minus_adaptive,
        combined_se,
        fixed_dominates: fixed.mean >= adaptive.mean - 3.0 * combined_se,
        strict: fixed.mean - adaptive.mean > 3.0 * combined_se,
        equal_moments,
        biased,
    })
}
