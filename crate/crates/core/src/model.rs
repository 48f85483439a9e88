//! Domain types for joint (JMR) and ordinary (OMR) mixture regression, plus
//! exact density, log-likelihood and sampling routines.
//!
//! Component `k` of a JMR model has joint density
//! `φ(y; α_k + ζ_kᵀz + β_kᵀx, σ_k²) · φ(x; μ_k, Σ_k)`. OMR components keep
//! only the regression factor, and covariate-only Gaussian mixtures (used
//! for model-based clustering) keep only the covariate factor.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CholeskyFactor};
use crate::rng::rng_from_seed;

/// Default relative eigenvalue floor for covariate covariances.
pub const DEFAULT_COV_FLOOR: f64 = 1e-8;
/// Default relative floor for error variances (times the sample variance of y).
pub const DEFAULT_SIGMA2_FLOOR: f64 = 1e-10;

/// Which factors of the joint density a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Regression and covariate law.
    Jmr,
    /// Regression only; the covariate is treated as fixed.
    Omr,
    /// Covariate law only (plain Gaussian mixture on x).
    Gmm,
}

impl ModelKind {
    pub fn has_regression(self) -> bool {
        matches!(self, ModelKind::Jmr | ModelKind::Omr)
    }

    pub fn has_covariate(self) -> bool {
        matches!(self, ModelKind::Jmr | ModelKind::Gmm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Jmr => "jmr",
            ModelKind::Omr => "omr",
            ModelKind::Gmm => "gmm",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jmr" => Ok(ModelKind::Jmr),
            "omr" => Ok(ModelKind::Omr),
            "gmm" => Ok(ModelKind::Gmm),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Variance floors applied during estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floors {
    /// Eigenvalues of Σ_k are floored at `cov_rel · trace(Σ_k) / p`.
    pub cov_rel: f64,
    /// σ_k² is floored at `sigma2_rel · var(y)`.
    pub sigma2_rel: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self {
            cov_rel: DEFAULT_COV_FLOOR,
            sigma2_rel: DEFAULT_SIGMA2_FLOOR,
        }
    }
}

/// Linear regression block `y = α + ζᵀz + βᵀx + ε`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub alpha: f64,
    pub zeta: DVector<f64>,
    pub beta: DVector<f64>,
    pub sigma2: f64,
}

impl Regression {
    pub fn new(alpha: f64, zeta: DVector<f64>, beta: DVector<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "error variance must be positive and finite, got {sigma2}"
            )));
        }
        if !alpha.is_finite() || zeta.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression coefficients".into()));
        }
        Ok(Self {
            alpha,
            zeta,
            beta,
            sigma2,
        })
    }

    /// Linear predictor `α + ζᵀz + βᵀx`.
    #[inline]
    pub fn mean(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut m = self.alpha;
        for (b, v) in self.beta.iter().zip(x) {
            m += b * v;
        }
        for (c, v) in self.zeta.iter().zip(z) {
            m += c * v;
        }
        m
    }

    #[inline]
    pub fn log_density(&self, y: f64, x: &[f64], z: &[f64]) -> f64 {
        linalg::normal_logpdf(y, self.mean(x, z), self.sigma2)
    }

    /// Coefficients stacked as `(α, ζ, β)`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(1 + self.zeta.len() + self.beta.len());
        v.push(self.alpha);
        v.extend(self.zeta.iter());
        v.extend(self.beta.iter());
        DVector::from_vec(v)
    }
}

/// Multivariate normal covariate law with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: CholeskyFactor,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::with_floor(mean, cov, DEFAULT_COV_FLOOR)
    }

    /// Builds the law after flooring the eigenvalues of `cov` at
    /// `floor_rel · trace / p`.
    pub fn with_floor(mean: DVector<f64>, cov: DMatrix<f64>, floor_rel: f64) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {p}, covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariate mean".into()));
        }
        let cov = linalg::floor_covariance(&cov, floor_rel)?;
        let factor = CholeskyFactor::new(&cov)?;
        Ok(Self { mean, cov, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    #[inline]
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.factor.log_density(x, self.mean.as_slice())
    }

    /// One draw `μ + L·e` with `e` standard normal.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.dim();
        let e = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.factor.lower() * e
    }
}

/// Log-density of N(mu, sigma) at x via a triangular factorization.
///
/// `sigma` is floored at the default eigenvalue floor first.
pub fn mvn_logpdf(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, mean has length {}",
            x.len(),
            mu.len()
        )));
    }
    let law = Gaussian::new(mu.clone(), sigma.clone())?;
    Ok(law.log_density(x.as_slice()))
}

/// One mixture component. Which blocks are present depends on the model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub regression: Option<Regression>,
    pub covariate: Option<Gaussian>,
}

impl Component {
    pub fn jmr(regression: Regression, covariate: Gaussian) -> Self {
        Self {
            regression: Some(regression),
            covariate: Some(covariate),
        }
    }

    pub fn omr(regression: Regression) -> Self {
        Self {
            regression: Some(regression),
            covariate: None,
        }
    }

    pub fn gmm(covariate: Gaussian) -> Self {
        Self {
            regression: None,
            covariate: Some(covariate),
        }
    }

    /// Log of the component density of `(y, x)` given `z`: the regression
    /// factor plus, when present, the covariate factor.
    #[inline]
    pub fn log_density(&self, y: f64, x: &[f64], z: &[f64]) -> f64 {
        let mut lp = 0.0;
        if let Some(reg) = &self.regression {
            lp += reg.log_density(y, x, z);
        }
        if let Some(cov) = &self.covariate {
            lp += cov.log_density(x);
        }
        lp
    }
}

/// Checked form of [`Component::log_density`].
pub fn component_joint_logdensity(
    y: f64,
    x: &DVector<f64>,
    z: Option<&DVector<f64>>,
    c: &Component,
) -> Result<f64> {
    let empty = DVector::<f64>::zeros(0);
    let z = z.unwrap_or(&empty);
    if let Some(reg) = &c.regression {
        if reg.beta.len() != x.len() || reg.zeta.len() != z.len() {
            return Err(Error::DimensionMismatch(format!(
                "component expects p={}, q={}; got p={}, q={}",
                reg.beta.len(),
                reg.zeta.len(),
                x.len(),
                z.len()
            )));
        }
    }
    if let Some(cov) = &c.covariate {
        if cov.dim() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "covariate law has dimension {}, point has {}",
                cov.dim(),
                x.len()
            )));
        }
    }
    Ok(c.log_density(y, x.as_slice(), z.as_slice()))
}

/// Full parameter set of a finite mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    kind: ModelKind,
    weights: Vec<f64>,
    components: Vec<Component>,
    p: usize,
    q: usize,
}

impl MixtureModel {
    pub fn new(kind: ModelKind, weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        let k = components.len();
        if k == 0 {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        if weights.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} mixing proportions for {k} components",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("mixing proportions must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixing proportions sum to {total}, not 1"
            )));
        }
        let mut p = None;
        let mut q = None;
        for (idx, c) in components.iter().enumerate() {
            if c.regression.is_some() != kind.has_regression()
                || c.covariate.is_some() != kind.has_covariate()
            {
                return Err(Error::InvalidParameter(format!(
                    "component {idx} does not match model kind {}",
                    kind.as_str()
                )));
            }
            let (cp, cq) = match (&c.regression, &c.covariate) {
                (Some(r), Some(g)) => {
                    if r.beta.len() != g.dim() {
                        return Err(Error::DimensionMismatch(format!(
                            "component {idx}: slope length {} vs covariate dimension {}",
                            r.beta.len(),
                            g.dim()
                        )));
                    }
                    (r.beta.len(), r.zeta.len())
                }
                (Some(r), None) => (r.beta.len(), r.zeta.len()),
                (None, Some(g)) => (g.dim(), 0),
                (None, None) => unreachable!("kind check guarantees at least one block"),
            };
            if *p.get_or_insert(cp) != cp || *q.get_or_insert(cq) != cq {
                return Err(Error::DimensionMismatch(format!(
                    "component {idx} has dimensions ({cp}, {cq}) inconsistent with component 0"
                )));
            }
        }
        Ok(Self {
            kind,
            weights,
            components,
            p: p.unwrap_or(0),
            q: q.unwrap_or(0),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Covariate dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Invariant-covariate dimension.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    /// Same model with components reordered so that new index `j` holds old
    /// component `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k());
        Self {
            kind: self.kind,
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            components: perm.iter().map(|&i| self.components[i].clone()).collect(),
            p: self.p,
            q: self.q,
        }
    }

    /// Drops covariate laws, turning a JMR model into its OMR counterpart.
    pub fn to_omr(&self) -> Result<Self> {
        if !self.kind.has_regression() {
            return Err(Error::Unsupported("covariate-only model has no regression".into()));
        }
        let comps = self
            .components
            .iter()
            .map(|c| Component::omr(c.regression.clone().expect("regression present")))
            .collect();
        Self::new(ModelKind::Omr, self.weights.clone(), comps)
    }

    pub(crate) fn check_dataset(&self, d: &Dataset) -> Result<()> {
        if d.p() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "model has p={}, dataset has p={}",
                self.p,
                d.p()
            )));
        }
        if self.kind.has_regression() && d.q() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "model has q={}, dataset has q={}",
                self.q,
                d.q()
            )));
        }
        Ok(())
    }

    /// n×K matrix of `ln π_k + ln f_k(y_i, x_i | z_i)`.
    pub fn log_weighted_densities(&self, d: &Dataset) -> Result<DMatrix<f64>> {
        self.check_dataset(d)?;
        let n = d.n();
        let k = self.k();
        let xt = d.x.transpose();
        let zt = d.z.transpose();
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let mut out = DMatrix::zeros(n, k);
        for i in 0..n {
            let xi = xt.column(i);
            let zi = zt.column(i);
            for (j, c) in self.components.iter().enumerate() {
                out[(i, j)] = log_w[j] + c.log_density(d.y[i], xi.as_slice(), zi.as_slice());
            }
        }
        Ok(out)
    }
}

/// n paired observations with optional invariant covariates and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    /// n×p covariates that enter the mixture density.
    pub x: DMatrix<f64>,
    /// n×q invariant covariates (q may be 0); regression only.
    pub z: DMatrix<f64>,
    /// True memberships, 0-based. Used for scoring, never for fitting.
    pub truth: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        z: Option<DMatrix<f64>>,
        truth: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = y.len();
        let z = z.unwrap_or_else(|| DMatrix::zeros(n, 0));
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, x has {}, z has {}",
                x.nrows(),
                z.nrows()
            )));
        }
        if let Some(t) = &truth {
            if t.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "y has {n} rows, truth has {}",
                    t.len()
                )));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("invariant covariates".into()));
        }
        Ok(Self { y, x, z, truth })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn x_row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    pub fn z_row(&self, i: usize) -> DVector<f64> {
        self.z.row(i).transpose()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            y: DVector::from_fn(idx.len(), |r, _| self.y[idx[r]]),
            x: self.x.select_rows(idx),
            z: self.z.select_rows(idx),
            truth: self.truth.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }

    /// All rows except `skip`.
    pub fn without(&self, skip: usize) -> Self {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| i != skip).collect();
        self.select(&idx)
    }

    /// Every row repeated `times` times (block-wise).
    pub fn repeated(&self, times: usize) -> Self {
        let idx: Vec<usize> = (0..times).flat_map(|_| 0..self.n()).collect();
        self.select(&idx)
    }

    /// Sample variance of y (divisor n).
    pub fn y_variance(&self) -> f64 {
        let n = self.n() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.y.mean();
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

/// Observed-data log-likelihood `Σ_i ln Σ_k π_k f_k(y_i, x_i)`.
pub fn loglik(m: &MixtureModel, d: &Dataset) -> Result<f64> {
    if d.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let lw = m.log_weighted_densities(d)?;
    let mut total = 0.0;
    let mut row = vec![0.0; m.k()];
    for i in 0..d.n() {
        for j in 0..m.k() {
            row[j] = lw[(i, j)];
        }
        total += linalg::log_sum_exp(&row);
    }
    Ok(total)
}

/// Draws `n` observations from a JMR model with truth labels filled.
pub fn sample(m: &MixtureModel, n: usize, seed: u64) -> Result<Dataset> {
    if m.kind() != ModelKind::Jmr {
        return Err(Error::Unsupported(
            "sampling needs both the regression and the covariate law (JMR)".into(),
        ));
    }
    if m.q() > 0 {
        return Err(Error::Unsupported(
            "sampling with invariant covariates needs a law for z".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let p = m.p();
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, p);
    let mut truth = Vec::with_capacity(n);
    let empty: [f64; 0] = [];
    for i in 0..n {
        let k = draw_category(m.weights(), &mut rng);
        let comp = m.component(k);
        let law = comp.covariate.as_ref().expect("JMR has covariate law");
        let reg = comp.regression.as_ref().expect("JMR has regression");
        let xi = law.draw(&mut rng);
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * reg.sigma2.sqrt();
        y[i] = reg.mean(xi.as_slice(), &empty) + eps;
        x.set_row(i, &xi.transpose());
        truth.push(k);
    }
    Dataset::new(y, x, None, Some(truth))
}

/// Index drawn from the categorical distribution `weights`.
pub fn draw_category<R: rand::Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_jmr_component(alpha: f64, beta: f64, mu: f64) -> Component {
        Component::jmr(
            Regression::new(alpha, DVector::zeros(0), DVector::from_element(1, beta), 1.0).unwrap(),
            Gaussian::new(DVector::from_element(1, mu), DMatrix::identity(1, 1)).unwrap(),
        )
    }

    #[test]
    fn mvn_logpdf_standard_cases() {
        let v = mvn_logpdf(
            &DVector::zeros(1),
            &DVector::zeros(1),
            &DMatrix::identity(1, 1),
        )
        .unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
        let v = mvn_logpdf(
            &DVector::zeros(2),
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_relative_eq!(v, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
        assert_relative_eq!(v, -1.837877, epsilon = 1e-6);
    }

    #[test]
    fn mvn_logpdf_matches_explicit_2x2_inverse() {
        let x = [1.0, -1.0];
        let (a, b, d) = (2.0, 0.5, 1.0);
        let det: f64 = a * d - b * b;
        let inv = [d / det, -b / det, -b / det, a / det];
        let quad = x[0] * (inv[0] * x[0] + inv[1] * x[1]) + x[1] * (inv[2] * x[0] + inv[3] * x[1]);
        let oracle = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        let got = mvn_logpdf(
            &DVector::from_row_slice(&x),
            &DVector::zeros(2),
            &DMatrix::from_row_slice(2, 2, &[a, b, b, d]),
        )
        .unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-13);
    }

    #[test]
    fn mvn_logpdf_rejects_bad_input() {
        let r = mvn_logpdf(&DVector::zeros(2), &DVector::zeros(1), &DMatrix::identity(1, 1));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let r = mvn_logpdf(&DVector::zeros(2), &DVector::zeros(2), &DMatrix::zeros(2, 2));
        assert_eq!(r, Err(Error::DegenerateCovariance));
    }

    #[test]
    fn joint_logdensity_unit_example() {
        let c = unit_jmr_component(0.0, 1.0, 0.0);
        let v = component_joint_logdensity(1.0, &DVector::zeros(1), None, &c).unwrap();
        assert_relative_eq!(v, -2.337877, epsilon = 1e-6);
    }

    #[test]
    fn zero_residual_regression_term() {
        let reg = Regression::new(
            0.3,
            DVector::zeros(0),
            DVector::from_row_slice(&[1.5, -2.0]),
            0.7,
        )
        .unwrap();
        let x = [0.4, 1.1];
        let y = reg.mean(&x, &[]);
        assert_relative_eq!(
            reg.log_density(y, &x, &[]),
            -0.5 * (2.0 * std::f64::consts::PI * 0.7).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn omr_component_omits_covariate_term() {
        let reg = Regression::new(0.0, DVector::zeros(0), DVector::from_element(1, 1.0), 1.0).unwrap();
        let c = Component::omr(reg);
        let v = component_joint_logdensity(1.0, &DVector::zeros(1), None, &c).unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5, epsilon = 1e-14);
    }

    #[test]
    fn regression_rejects_nonpositive_variance() {
        assert!(Regression::new(0.0, DVector::zeros(0), DVector::zeros(1), 0.0).is_err());
        assert!(Regression::new(0.0, DVector::zeros(0), DVector::zeros(1), -1.0).is_err());
    }

    #[test]
    fn model_validates_weights() {
        let c = unit_jmr_component(0.0, 1.0, 0.0);
        assert!(MixtureModel::new(ModelKind::Jmr, vec![0.5, 0.6], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureModel::new(ModelKind::Jmr, vec![1.0, 0.0], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureModel::new(ModelKind::Omr, vec![1.0], vec![c.clone()]).is_err());
        assert!(MixtureModel::new(ModelKind::Jmr, vec![1.0], vec![c]).is_ok());
    }

    #[test]
    fn loglik_single_component_is_sum() {
        let c = unit_jmr_component(0.5, 2.0, 1.0);
        let m = MixtureModel::new(ModelKind::Jmr, vec![1.0], vec![c.clone()]).unwrap();
        let d = sample(&m, 20, 3).unwrap();
        let direct: f64 = (0..d.n())
            .map(|i| component_joint_logdensity(d.y[i], &d.x_row(i), None, &c).unwrap())
            .sum();
        assert_relative_eq!(loglik(&m, &d).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn loglik_empty_dataset_errors() {
        let m = MixtureModel::new(ModelKind::Jmr, vec![1.0], vec![unit_jmr_component(0.0, 1.0, 0.0)])
            .unwrap();
        let d = Dataset::new(DVector::zeros(0), DMatrix::zeros(0, 1), None, None).unwrap();
        assert_eq!(loglik(&m, &d), Err(Error::EmptyDataset));
    }

    #[test]
    fn sampling_contract() {
        let m = MixtureModel::new(ModelKind::Jmr, vec![1.0], vec![unit_jmr_component(0.0, 1.0, 0.0)])
            .unwrap();
        assert_eq!(sample(&m, 0, 1).unwrap().n(), 0);
        let a = sample(&m, 50, 9).unwrap();
        let b = sample(&m, 50, 9).unwrap();
        assert_eq!(a, b);
        let omr = m.to_omr().unwrap();
        assert!(matches!(sample(&omr, 5, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let r = Dataset::new(
            DVector::from_row_slice(&[1.0, f64::NAN]),
            DMatrix::zeros(2, 1),
            None,
            None,
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
        let r = Dataset::new(DVector::zeros(2), DMatrix::zeros(3, 1), None, None);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
