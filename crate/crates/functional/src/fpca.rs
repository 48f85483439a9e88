//! Dense-grid functional principal components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::design::ScoreDesign;
use crate::error::{FunctionalError, Result};
use crate::smooth::{Grid, SmoothedCurves};

/// Eigenvalues below this fraction of the largest count as numerically zero.
const RANK_TOL: f64 = 1e-10;
/// |⟨ψ, 1⟩| below this falls back to the first-nonzero-value sign rule.
const SIGN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub grid: Grid,
    /// Pointwise mean curve on the grid.
    pub mean: DVector<f64>,
    /// Leading eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// G×M eigenfunctions, orthonormal under the grid quadrature.
    pub eigenfunctions: DMatrix<f64>,
    /// Σ_{j≤m} λ_j / Σ_j λ_j for m = 1..M.
    pub cumulative_variance: Vec<f64>,
}

impl EigenSystem {
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Fixes the sign of `psi` so that ⟨ψ, 1⟩ ≥ 0, or, when that is zero, so
/// that its first nonzero grid value is positive.
fn orient(psi: &mut [f64], grid: &Grid) {
    let mass: f64 = grid.weights.iter().zip(psi.iter()).map(|(w, v)| w * v).sum();
    let flip = if mass.abs() > SIGN_TOL {
        mass < 0.0
    } else {
        psi.iter().find(|v| v.abs() > SIGN_TOL).is_some_and(|v| *v < 0.0)
    };
    if flip {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
}

/// FPCA of the curves' grid values with covariance divisor n − 1.
pub fn fpca(s: &SmoothedCurves, m: usize) -> Result<EigenSystem> {
    let n = s.n();
    if n < m + 1 || n < 2 {
        return Err(FunctionalError::TooFewCurves {
            have: n,
            need: (m + 1).max(2),
        });
    }
    let g = s.grid.len();
    let mean = s.values.row_mean().transpose();
    let centered = DMatrix::from_fn(n, g, |i, j| s.values[(i, j)] - mean[j]);
    let sqrt_w = DVector::from_iterator(g, s.grid.weights.iter().map(|w| w.sqrt()));
    // W^{1/2} C^T C W^{1/2} / (n - 1)
    let scaled = DMatrix::from_fn(n, g, |i, j| centered[(i, j)] * sqrt_w[j]);
    let op = scaled.transpose() * &scaled / (n - 1) as f64;
    let eig = SymmetricEigen::new(op);
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambdas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let top = lambdas.first().copied().unwrap_or(0.0);
    let rank = lambdas.iter().filter(|&&l| top > 0.0 && l > RANK_TOL * top).count();
    if m > rank {
        return Err(FunctionalError::RankDeficient { requested: m, rank });
    }
    let total: f64 = lambdas.iter().sum();
    let mut eigenfunctions = DMatrix::zeros(g, m);
    for (j, &idx) in order.iter().take(m).enumerate() {
        let mut psi: Vec<f64> = (0..g).map(|r| eig.eigenvectors[(r, idx)] / sqrt_w[r]).collect();
        orient(&mut psi, &s.grid);
        eigenfunctions.set_column(j, &DVector::from_vec(psi));
    }
    let mut acc = 0.0;
    let cumulative_variance = lambdas[..m]
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect();
    Ok(EigenSystem {
        grid: s.grid.clone(),
        mean,
        eigenvalues: lambdas[..m].to_vec(),
        eigenfunctions,
        cumulative_variance,
    })
}

/// n×M scores ξ_ij = ⟨X_i − μ, ψ_j⟩ under the grid quadrature.
pub fn project_scores(s: &SmoothedCurves, e: &EigenSystem) -> Result<ScoreDesign> {
    if s.grid != e.grid {
        return Err(FunctionalError::GridMismatch);
    }
    let (n, g) = (s.n(), s.grid.len());
    let weighted = DMatrix::from_fn(n, g, |i, j| (s.values[(i, j)] - e.mean[j]) * s.grid.weights[j]);
    Ok(ScoreDesign {
        ids: s.ids.clone(),
        scores: weighted * &e.eigenfunctions,
    })
}

/// β(t) = Σ_j b_j ψ_j(t) on the grid.
pub fn reconstruct_slope(b: &DVector<f64>, e: &EigenSystem) -> Result<DVector<f64>> {
    if b.len() != e.m() {
        return Err(FunctionalError::DimensionMismatch(format!(
            "{} coefficients for {} eigenfunctions",
            b.len(),
            e.m()
        )));
    }
    Ok(&e.eigenfunctions * b)
}
