//! Small dense linear-algebra helpers: covariance regularization, Cholesky
//! log-densities and weighted least squares.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative diagonal threshold below which an R factor column counts as rank-deficient.
const QR_RANK_TOL: f64 = 1e-12;
/// Ridge added to the normal matrix when the QR route detects rank deficiency.
const RIDGE_REL: f64 = 1e-10;

/// Floors the eigenvalues of a symmetric matrix at `rel * trace / p`.
///
/// The matrix is returned untouched (bit for bit) when its smallest
/// eigenvalue already clears the floor.
pub fn floor_covariance(cov: &DMatrix<f64>, rel: f64) -> Result<DMatrix<f64>> {
    let p = cov.nrows();
    if p != cov.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if p == 0 {
        return Ok(cov.clone());
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance".into()));
    }
    let trace = cov.trace();
    if trace <= 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    let floor = rel * trace / p as f64;
    let sym = symmetrize(cov);
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    // slack keeps re-flooring an already floored matrix a no-op
    if min >= floor * (1.0 - 1e-6) {
        return Ok(sym);
    }
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok(symmetrize(&rebuilt))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Lower Cholesky factor together with `ln det`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
    log_det: f64,
}

impl CholeskyFactor {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol: Cholesky<f64, Dyn> =
            Cholesky::new(cov.clone()).ok_or(Error::DegenerateCovariance)?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::DegenerateCovariance);
        }
        Ok(Self { lower, log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Squared Mahalanobis norm `rᵀ Σ⁻¹ r` by forward substitution.
    pub fn mahalanobis_sq(&self, r: &[f64]) -> f64 {
        let p = self.dim();
        debug_assert_eq!(r.len(), p);
        let mut z = [0.0f64; 8];
        let mut heap;
        let z: &mut [f64] = if p <= 8 {
            &mut z[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..p {
            let mut s = r[i];
            for j in 0..i {
                s -= self.lower[(i, j)] * z[j];
            }
            z[i] = s / self.lower[(i, i)];
            acc += z[i] * z[i];
        }
        acc
    }

    pub fn log_density(&self, x: &[f64], mean: &[f64]) -> f64 {
        let p = self.dim();
        let mut r = [0.0f64; 8];
        let maha = if p <= 8 {
            for i in 0..p {
                r[i] = x[i] - mean[i];
            }
            self.mahalanobis_sq(&r[..p])
        } else {
            let r: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
            self.mahalanobis_sq(&r)
        };
        -0.5 * (p as f64 * LN_2PI + self.log_det + maha)
    }
}

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-density of N(mean, var) at `y`.
#[inline]
pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + var.ln() + r * r / var)
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Result of a weighted least-squares solve.
#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub coef: DVector<f64>,
    /// Σ w_i r_i².
    pub weighted_rss: f64,
    /// True when the ridge fallback was needed.
    pub ridged: bool,
}

/// Minimizes Σ w_i (y_i − d_iᵀb)² by Householder QR of W^{1/2}D.
///
/// Rank-deficient designs fall back to ridge-regularized normal equations
/// with ridge `1e-10 · trace(DᵀWD)`; `None` means that failed too.
pub fn weighted_least_squares(
    design: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
) -> Option<WlsSolution> {
    let (n, c) = design.shape();
    debug_assert_eq!(y.len(), n);
    debug_assert_eq!(weights.len(), n);
    let sw: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    let a = DMatrix::from_fn(n, c, |i, j| design[(i, j)] * sw[i]);
    let b = DVector::from_fn(n, |i, _| y[i] * sw[i]);

    let mut ridged = false;
    let coef = if n >= c && c > 0 {
        let qr = a.clone().qr();
        let r = qr.r();
        let max_diag = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let full_rank =
            max_diag > 0.0 && r.diagonal().iter().all(|v| v.abs() > QR_RANK_TOL * max_diag);
        if full_rank {
            let qtb = qr.q().transpose() * &b;
            r.solve_upper_triangular(&qtb)?
        } else {
            ridged = true;
            ridge_solve(&a, &b)?
        }
    } else if c == 0 {
        DVector::zeros(0)
    } else {
        ridged = true;
        ridge_solve(&a, &b)?
    };
    if coef.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let resid = &b - &a * &coef;
    let weighted_rss = resid.norm_squared();
    Some(WlsSolution {
        coef,
        weighted_rss,
        ridged,
    })
}

fn ridge_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let mut normal = a.transpose() * a;
    let trace = normal.trace();
    if !(trace > 0.0) {
        return None;
    }
    let ridge = RIDGE_REL * trace;
    for i in 0..normal.nrows() {
        normal[(i, i)] += ridge;
    }
    let chol = Cholesky::new(normal)?;
    Some(chol.solve(&(a.transpose() * b)))
}
