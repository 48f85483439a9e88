//! EM estimation for JMR, OMR and covariate-only Gaussian mixtures, the OLS
//! and model-based-clustering baselines, BIC selection of the component
//! count, and label canonicalization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, weighted_least_squares};
use crate::model::{Component, Dataset, Floors, Gaussian, MixtureModel, ModelKind, Regression};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Absolute slack allowed when checking that EM never decreases ℓ_n.
pub const ASCENT_SLACK: f64 = 1e-8;
const LLOYD_STEPS: usize = 10;

/// n×K matrix of posterior membership probabilities τ_ik.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    tau: DMatrix<f64>,
}

impl Responsibilities {
    /// Validates entries in [0, 1] and rows summing to 1 within 1e-10.
    pub fn new(tau: DMatrix<f64>) -> Result<Self> {
        for i in 0..tau.nrows() {
            let row = tau.row(i);
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "responsibility row {i} has entries outside [0, 1]"
                )));
            }
            if (row.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "responsibility row {i} sums to {}",
                    row.sum()
                )));
            }
        }
        Ok(Self { tau })
    }

    /// One-hot rows from 0-based labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut tau = DMatrix::zeros(labels.len(), k);
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidParameter(format!("label {l} out of range for K={k}")));
            }
            tau[(i, l)] = 1.0;
        }
        Ok(Self { tau })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.tau
    }

    pub fn n(&self) -> usize {
        self.tau.nrows()
    }

    pub fn k(&self) -> usize {
        self.tau.ncols()
    }

    /// Effective component sizes Σ_i τ_ik.
    pub fn column_sums(&self) -> Vec<f64> {
        self.tau.column_iter().map(|c| c.sum()).collect()
    }

    /// Row-wise argmax, ties toward the smaller index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.tau.row_iter().map(|r| argmax(r.iter().copied())).collect()
    }

    pub(crate) fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            tau: self.tau.select_columns(perm),
        }
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Knobs for [`fit`] and friends.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Relative change in ℓ_n below which EM stops.
    pub tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    pub floors: Floors,
    /// Minimum Σ_i τ_ik before a component counts as collapsed.
    /// `None` means `p + q + 2`.
    pub min_effective_weight: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-8,
            n_restarts: 10,
            seed: 0,
            floors: Floors::default(),
            min_effective_weight: None,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, n: usize) -> Self {
        self.n_restarts = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        if self.n_restarts < 1 {
            return Err(Error::InvalidParameter("n_restarts must be at least 1".into()));
        }
        Ok(())
    }

    fn min_weight(&self, p: usize, q: usize) -> f64 {
        self.min_effective_weight.unwrap_or((p + q + 2) as f64)
    }
}

/// Outcome of a converged (or capped) EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: MixtureModel,
    pub loglik_trace: Vec<f64>,
    /// ℓ_n − (|Ψ|/2)·ln n, larger is better.
    pub bic: f64,
    pub tau: Responsibilities,
    pub converged: bool,
    pub restart_index: usize,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.loglik_trace.len()
    }
}

/// E-step. Returns τ and the log-likelihood of `m` on `d`.
pub fn estep_with_loglik(m: &MixtureModel, d: &Dataset) -> Result<(Responsibilities, f64)> {
    if d.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut lw = m.log_weighted_densities(d)?;
    let k = m.k();
    let mut total = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..d.n() {
        for j in 0..k {
            row[j] = lw[(i, j)];
        }
        let lse = linalg::log_sum_exp(&row);
        if !lse.is_finite() {
            return Err(Error::NonFinite(format!("mixture density at row {i}")));
        }
        total += lse;
        for j in 0..k {
            lw[(i, j)] = (row[j] - lse).exp();
        }
    }
    Ok((Responsibilities { tau: lw }, total))
}

/// E-step: τ_ik = π_k f_k / Σ_ℓ π_ℓ f_ℓ, computed in log space.
pub fn estep(m: &MixtureModel, d: &Dataset) -> Result<Responsibilities> {
    estep_with_loglik(m, d).map(|(t, _)| t)
}

/// EM objective Q(Ψ | τ) = Σ_i Σ_k τ_ik (ln π_k + ln f_k(y_i, x_i)).
pub fn expected_complete_loglik(m: &MixtureModel, d: &Dataset, tau: &Responsibilities) -> Result<f64> {
    let lw = m.log_weighted_densities(d)?;
    if tau.n() != d.n() || tau.k() != m.k() {
        return Err(Error::DimensionMismatch("responsibilities vs model/dataset".into()));
    }
    Ok(lw.component_mul(tau.matrix()).sum())
}

/// Design matrix `[1, z, x]`.
pub(crate) fn regression_design(d: &Dataset) -> DMatrix<f64> {
    let (n, p, q) = (d.n(), d.p(), d.q());
    DMatrix::from_fn(n, 1 + q + p, |i, j| {
        if j == 0 {
            1.0
        } else if j <= q {
            d.z[(i, j - 1)]
        } else {
            d.x[(i, j - 1 - q)]
        }
    })
}

/// M-step. Weighted moments for the covariate law, weighted least squares
/// of y on `(1, z, x)` for the regression, column means for π.
pub fn mstep(
    tau: &Responsibilities,
    d: &Dataset,
    kind: ModelKind,
    floors: &Floors,
    min_effective_weight: f64,
) -> Result<MixtureModel> {
    let n = d.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if tau.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "responsibilities have {} rows, dataset has {n}",
            tau.n()
        )));
    }
    let k = tau.k();
    let (p, q) = (d.p(), d.q());
    let sizes = tau.column_sums();
    for (j, &w) in sizes.iter().enumerate() {
        if !(w >= min_effective_weight) || w <= 0.0 {
            return Err(Error::ComponentCollapse {
                component: j,
                weight: w,
                min: min_effective_weight,
            });
        }
    }
    let total: f64 = sizes.iter().sum();
    let weights: Vec<f64> = sizes.iter().map(|w| w / total).collect();

    let design = kind.has_regression().then(|| regression_design(d));
    let sigma2_floor = floors.sigma2_rel * d.y_variance();
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let w: Vec<f64> = tau.matrix().column(j).iter().copied().collect();
        let nk = sizes[j];
        let covariate = if kind.has_covariate() {
            let mut mean = DVector::zeros(p);
            for i in 0..n {
                for a in 0..p {
                    mean[a] += w[i] * d.x[(i, a)];
                }
            }
            mean /= nk;
            let mut cov = DMatrix::zeros(p, p);
            for i in 0..n {
                for a in 0..p {
                    let ra = d.x[(i, a)] - mean[a];
                    for b in 0..=a {
                        cov[(a, b)] += w[i] * ra * (d.x[(i, b)] - mean[b]);
                    }
                }
            }
            for a in 0..p {
                for b in 0..=a {
                    let v = cov[(a, b)] / nk;
                    cov[(a, b)] = v;
                    cov[(b, a)] = v;
                }
            }
            Some(Gaussian::with_floor(mean, cov, floors.cov_rel)?)
        } else {
            None
        };
        let regression = if let Some(design) = &design {
            let sol = weighted_least_squares(design, d.y.as_slice(), &w)
                .ok_or(Error::SingularDesign { component: j })?;
            let sigma2 = (sol.weighted_rss / nk).max(sigma2_floor);
            let c = &sol.coef;
            Some(Regression::new(
                c[0],
                DVector::from_fn(q, |r, _| c[1 + r]),
                DVector::from_fn(p, |r, _| c[1 + q + r]),
                sigma2,
            )?)
        } else {
            None
        };
        components.push(Component {
            regression,
            covariate,
        });
    }
    MixtureModel::new(kind, weights, components)
}

/// Feature rows used for the k-means++ initializer: standardized x, plus
/// standardized y for kinds that model the regression.
fn init_features(d: &Dataset, kind: ModelKind) -> Vec<Vec<f64>> {
    let n = d.n();
    let mut cols: Vec<Vec<f64>> = (0..d.p()).map(|a| d.x.column(a).iter().copied().collect()).collect();
    if kind.has_regression() {
        cols.push(d.y.iter().copied().collect());
    }
    let cols: Vec<Vec<f64>> = cols
        .into_iter()
        .filter_map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            (sd > 0.0).then(|| c.iter().map(|v| (v - mean) / sd).collect())
        })
        .collect();
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum()
}

/// Hard partition from k-means++ seeding followed by a few Lloyd sweeps.
pub fn initial_partition(d: &Dataset, k: usize, kind: ModelKind, rng: &mut Rng) -> Vec<usize> {
    use rand::Rng as _;
    let n = d.n();
    if k <= 1 || n == 0 {
        return vec![0; n];
    }
    let feats = init_features(d, kind);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(feats[rng.random_range(0..n)].clone());
    let mut dist: Vec<f64> = feats.iter().map(|f| sq_dist(f, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in dist.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(feats[next].clone());
        for (i, f) in feats.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(f, centers.last().unwrap()));
        }
    }
    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        feats
            .iter()
            .map(|f| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, ctr) in centers.iter().enumerate() {
                    let dd = sq_dist(f, ctr);
                    if dd < best_d {
                        best = c;
                        best_d = dd;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    let dim = feats.first().map_or(0, |f| f.len());
    for _ in 0..LLOYD_STEPS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (f, &l) in feats.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(f) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Runs one EM chain from `tau0`.
fn run_em(
    d: &Dataset,
    kind: ModelKind,
    tau0: &Responsibilities,
    cfg: &FitConfig,
    restart_index: usize,
) -> Result<FitResult> {
    let min_w = cfg.min_weight(d.p(), if kind.has_regression() { d.q() } else { 0 });
    let mut model = mstep(tau0, d, kind, &cfg.floors, min_w)?;
    let (mut tau, mut ll) = estep_with_loglik(&model, d)?;
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 1..cfg.max_iter {
        let next_model = mstep(&tau, d, kind, &cfg.floors, min_w)?;
        let (next_tau, next_ll) = estep_with_loglik(&next_model, d)?;
        if next_ll < ll - ASCENT_SLACK {
            // a floor kicked in and broke monotonicity; keep the better point
            break;
        }
        let rel = (next_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        model = next_model;
        tau = next_tau;
        ll = next_ll;
        trace.push(ll);
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }
    let n_params = param_count(model.k(), d.p(), model.q(), kind);
    let bic = ll - 0.5 * n_params as f64 * (d.n() as f64).ln();
    let perm = canonical_permutation(&model);
    Ok(FitResult {
        model: model.permuted(&perm),
        loglik_trace: trace,
        bic,
        tau: tau.permuted(&perm),
        converged,
        restart_index,
    })
}

fn best_of_restarts(
    d: &Dataset,
    k: usize,
    kind: ModelKind,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if d.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    if kind.has_regression() && !(d.y_variance() > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    let runs: Vec<Result<FitResult>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, r as u64));
            let labels = initial_partition(d, k, kind, &mut rng);
            let tau0 = Responsibilities::from_labels(&labels, k)?;
            run_em(d, kind, &tau0, cfg, r)
        })
        .collect();
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.loglik() > b.loglik()) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| Error::FitFailed {
        restarts: cfg.n_restarts,
        last: Box::new(last_err.unwrap_or(Error::EmptyDataset)),
    })
}

/// Best-of-restarts EM fit of a K-component JMR or OMR model.
pub fn fit(d: &Dataset, k: usize, kind: ModelKind, cfg: &FitConfig) -> Result<FitResult> {
    if kind == ModelKind::Gmm {
        return Err(Error::Unsupported(
            "use fit_gmm_covariate for covariate-only mixtures".into(),
        ));
    }
    best_of_restarts(d, k, kind, cfg)
}

/// Plain Gaussian-mixture EM on the rows of `x`.
pub fn fit_gmm_covariate(x: &DMatrix<f64>, k: usize, cfg: &FitConfig) -> Result<FitResult> {
    let d = Dataset::new(DVector::zeros(x.nrows()), x.clone(), None, None)?;
    best_of_restarts(&d, k, ModelKind::Gmm, cfg)
}

/// Ordinary least squares fit of y on `(1, z, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub alpha: f64,
    pub zeta: DVector<f64>,
    pub beta: DVector<f64>,
    /// Residual variance with divisor n.
    pub sigma2: f64,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut v = self.alpha;
        for (b, xv) in self.beta.iter().zip(x) {
            v += b * xv;
        }
        for (c, zv) in self.zeta.iter().zip(z) {
            v += c * zv;
        }
        v
    }
}

pub fn fit_ols(d: &Dataset) -> Result<OlsFit> {
    let n = d.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let (p, q) = (d.p(), d.q());
    let design = regression_design(d);
    let sol = weighted_least_squares(&design, d.y.as_slice(), &vec![1.0; n])
        .filter(|s| !s.ridged)
        .ok_or(Error::SingularDesign { component: 0 })?;
    let c = &sol.coef;
    Ok(OlsFit {
        alpha: c[0],
        zeta: DVector::from_fn(q, |r, _| c[1 + r]),
        beta: DVector::from_fn(p, |r, _| c[1 + q + r]),
        sigma2: sol.weighted_rss / n as f64,
    })
}

/// Two-step model-based clustering: Gaussian mixture on x, then OLS per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct MbcFit {
    /// JMR-shaped model: GMM weights and covariate laws with per-cluster OLS
    /// regressions, so posterior-weighted prediction applies unchanged.
    pub model: MixtureModel,
    /// Hard cluster labels of the training rows.
    pub labels: Vec<usize>,
    pub gmm: FitResult,
}

pub fn fit_mbc(d: &Dataset, k: usize, cfg: &FitConfig) -> Result<MbcFit> {
    let gmm = fit_gmm_covariate(&d.x, k, cfg)?;
    let labels = gmm.tau.hard_labels();
    let min_size = d.p() + d.q() + 2;
    let sigma2_floor = cfg.floors.sigma2_rel * d.y_variance();
    let mut components = Vec::with_capacity(k);
    for (c, comp) in gmm.model.components().iter().enumerate() {
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect();
        if idx.len() < min_size {
            return Err(Error::DegenerateCluster {
                cluster: c,
                size: idx.len(),
                min: min_size,
            });
        }
        let ols = fit_ols(&d.select(&idx))?;
        let reg = Regression::new(ols.alpha, ols.zeta, ols.beta, ols.sigma2.max(sigma2_floor))?;
        components.push(Component::jmr(reg, comp.covariate.clone().expect("gmm law")));
    }
    let model = MixtureModel::new(ModelKind::Jmr, gmm.model.weights().to_vec(), components)?;
    Ok(MbcFit { model, labels, gmm })
}

/// Number of free parameters |Ψ|.
pub fn param_count(k: usize, p: usize, q: usize, kind: ModelKind) -> usize {
    let cov = p + p * (p + 1) / 2;
    let reg = 1 + q + p + 1;
    let per = match kind {
        ModelKind::Jmr => reg + cov,
        ModelKind::Omr => reg,
        ModelKind::Gmm => cov,
    };
    k.saturating_sub(1) + k * per
}

/// Fit attempt for one candidate K.
#[derive(Debug, Clone)]
pub struct CandidateFit {
    pub k: usize,
    pub result: Result<FitResult>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub k_hat: usize,
    pub candidates: Vec<CandidateFit>,
}

impl Selection {
    pub fn best(&self) -> &FitResult {
        self.candidates
            .iter()
            .find(|c| c.k == self.k_hat)
            .and_then(|c| c.result.as_ref().ok())
            .expect("selected K has a fit")
    }

    /// Candidates whose fits failed, with their errors.
    pub fn failures(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.candidates
            .iter()
            .filter_map(|c| c.result.as_ref().err().map(|e| (c.k, e)))
    }
}

/// BIC selection of K over `1..=k_max`; ties go to the smaller K.
pub fn select_k(d: &Dataset, k_max: usize, kind: ModelKind, cfg: &FitConfig) -> Result<Selection> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let candidates: Vec<CandidateFit> = (1..=k_max)
        .into_par_iter()
        .map(|k| CandidateFit {
            k,
            result: fit(d, k, kind, cfg),
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for c in &candidates {
        if let Ok(f) = &c.result {
            if best.is_none_or(|(_, b)| f.bic > b) {
                best = Some((c.k, f.bic));
            }
        }
    }
    match best {
        Some((k_hat, _)) => Ok(Selection { k_hat, candidates }),
        None => Err(Error::FitFailed {
            restarts: k_max,
            last: Box::new(
                candidates
                    .into_iter()
                    .rev()
                    .find_map(|c| c.result.err())
                    .unwrap_or(Error::EmptyDataset),
            ),
        }),
    }
}

fn sort_key(c: &Component, weight: f64) -> Vec<f64> {
    let mut key = vec![-weight];
    if let Some(g) = &c.covariate {
        key.extend(g.mean().iter());
        key.extend(g.cov().iter());
    }
    if let Some(r) = &c.regression {
        key.extend(r.stacked().iter());
        key.push(r.sigma2);
    }
    key
}

/// Permutation sorting components by π descending, then first covariate
/// mean coordinate ascending, then remaining parameters.
pub fn canonical_permutation(m: &MixtureModel) -> Vec<usize> {
    let keys: Vec<Vec<f64>> = m
        .components()
        .iter()
        .zip(m.weights())
        .map(|(c, &w)| sort_key(c, w))
        .collect();
    let mut perm: Vec<usize> = (0..m.k()).collect();
    perm.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(a.cmp(&b))
    });
    perm
}

pub fn canonicalize(m: &MixtureModel) -> MixtureModel {
    m.permuted(&canonical_permutation(m))
}
