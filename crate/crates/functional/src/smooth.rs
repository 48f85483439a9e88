//! Least-squares projection of discretely observed curves onto a B-spline
//! basis, evaluation on a dense grid, and analytic differentiation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bspline::BSplineBasis;
use crate::error::{FunctionalError, Result};

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Discretely observed curves on a common domain `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    ids: Vec<String>,
    times: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    a: f64,
    b: f64,
}

impl CurveSample {
    /// Validates strictly increasing, finite times inside `[a, b]`.
    pub fn new(ids: Vec<String>, times: Vec<Vec<f64>>, values: Vec<Vec<f64>>, a: f64, b: f64) -> Result<Self> {
        if ids.len() != times.len() || ids.len() != values.len() {
            return Err(FunctionalError::DimensionMismatch(format!(
                "{} ids, {} time vectors, {} value vectors",
                ids.len(),
                times.len(),
                values.len()
            )));
        }
        if !(a < b) {
            return Err(FunctionalError::InvalidKnots(format!("bad domain [{a}, {b}]")));
        }
        for ((id, t), v) in ids.iter().zip(&times).zip(&values) {
            let bad = |reason: &str| FunctionalError::InvalidCurve {
                subject: id.clone(),
                reason: reason.into(),
            };
            if t.len() != v.len() {
                return Err(bad("times and values differ in length"));
            }
            if t.iter().chain(v).any(|x| !x.is_finite()) {
                return Err(bad("non-finite entry"));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("times not strictly increasing"));
            }
            if t.iter().any(|&s| s < a || s > b) {
                return Err(bad("time outside the domain"));
            }
        }
        Ok(Self { ids, times, values, a, b })
    }

    /// Domain taken as the range of the pooled times.
    pub fn with_observed_domain(ids: Vec<String>, times: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        let a = times.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let b = times.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(ids, times, values, a, b)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn times(&self) -> &[Vec<f64>] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Distinct pooled observation times, sorted.
    pub fn pooled_times(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.times.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// Equally spaced grid with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn uniform(a: f64, b: f64, count: usize) -> Result<Self> {
        if count < 2 || !(a < b) {
            return Err(FunctionalError::DimensionMismatch(format!(
                "grid needs at least 2 points on a proper interval, got {count} on [{a}, {b}]"
            )));
        }
        let h = (b - a) / (count - 1) as f64;
        let points = (0..count)
            .map(|i| if i == count - 1 { b } else { a + h * i as f64 })
            .collect();
        let weights = (0..count)
            .map(|i| if i == 0 || i == count - 1 { 0.5 * h } else { h })
            .collect();
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Quadrature inner product of two grid functions.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }
}

/// Where the interior knots go.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum KnotSpec {
    /// Every distinct pooled observation time strictly inside the domain.
    #[default]
    Pooled,
    /// This many interior knots at quantiles of the pooled times.
    Count(usize),
    /// Explicit interior knots.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingOptions {
    pub order: usize,
    pub knots: KnotSpec,
    pub grid_points: usize,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            knots: KnotSpec::Pooled,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Curves represented in a spline basis and evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCurves {
    pub ids: Vec<String>,
    pub basis: BSplineBasis,
    /// n×B spline coefficients.
    pub coefs: DMatrix<f64>,
    pub grid: Grid,
    /// n×G curve values on the grid.
    pub values: DMatrix<f64>,
    /// Residual sum of squares of each curve's fit (zero for derivatives).
    pub rss: Vec<f64>,
}

impl SmoothedCurves {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Subset of curves, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            basis: self.basis.clone(),
            coefs: self.coefs.select_rows(idx),
            grid: self.grid.clone(),
            values: self.values.select_rows(idx),
            rss: idx.iter().map(|&i| self.rss[i]).collect(),
        }
    }

    /// Smoothed value of every curve at the right end of the domain.
    pub fn endpoint_values(&self) -> Vec<f64> {
        let last = self.grid.len() - 1;
        (0..self.n()).map(|i| self.values[(i, last)]).collect()
    }
}

fn interior_knots(raw: &CurveSample, spec: &KnotSpec) -> Result<Vec<f64>> {
    let (a, b) = raw.domain();
    let pooled = raw.pooled_times();
    let inside = |v: &f64| *v > a && *v < b;
    Ok(match spec {
        KnotSpec::Pooled => pooled.into_iter().filter(inside).collect(),
        KnotSpec::Count(c) => {
            if *c == 0 {
                return Ok(Vec::new());
            }
            let m = pooled.len();
            if m < 2 {
                return Err(FunctionalError::InvalidKnots("not enough pooled times".into()));
            }
            let mut ks: Vec<f64> = (1..=*c)
                .map(|j| {
                    let pos = j as f64 / (*c + 1) as f64 * (m - 1) as f64;
                    let lo = pos.floor() as usize;
                    let frac = pos - lo as f64;
                    if lo + 1 < m {
                        pooled[lo] * (1.0 - frac) + pooled[lo + 1] * frac
                    } else {
                        pooled[m - 1]
                    }
                })
                .filter(inside)
                .collect();
            ks.dedup();
            ks
        }
        KnotSpec::Explicit(v) => v.clone(),
    })
}

/// Per-curve least-squares projection onto the spline basis.
pub fn smooth_curves(raw: &CurveSample, opts: &SmoothingOptions) -> Result<SmoothedCurves> {
    let (a, b) = raw.domain();
    let knots = interior_knots(raw, &opts.knots)?;
    let basis = BSplineBasis::new(opts.order, &knots, a, b)?;
    let grid = Grid::uniform(a, b, opts.grid_points)?;
    let dim = basis.dim();
    let fits: Vec<Result<(DVector<f64>, f64)>> = (0..raw.n())
        .into_par_iter()
        .map(|i| {
            let (t, v) = (&raw.times()[i], &raw.values()[i]);
            let id = &raw.ids()[i];
            if t.len() < dim {
                return Err(FunctionalError::InsufficientObservations {
                    subject: id.clone(),
                    have: t.len(),
                    need: dim,
                });
            }
            let design = basis.design(t);
            let y = DVector::from_column_slice(v);
            let qr = design.clone().qr();
            let r = qr.r();
            let max_diag = r.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * max_diag) {
                return Err(FunctionalError::InvalidCurve {
                    subject: id.clone(),
                    reason: "observation times leave some basis functions unsupported".into(),
                });
            }
            let coef = r
                .solve_upper_triangular(&(qr.q().transpose() * &y))
                .ok_or_else(|| FunctionalError::InvalidCurve {
                    subject: id.clone(),
                    reason: "singular spline design".into(),
                })?;
            let rss = (&y - &design * &coef).norm_squared();
            Ok((coef, rss))
        })
        .collect();
    let mut coefs = DMatrix::zeros(raw.n(), dim);
    let mut rss = Vec::with_capacity(raw.n());
    for (i, f) in fits.into_iter().enumerate() {
        let (c, r) = f?;
        coefs.set_row(i, &c.transpose());
        rss.push(r);
    }
    let values = &coefs * basis.design(&grid.points).transpose();
    Ok(SmoothedCurves {
        ids: raw.ids().to_vec(),
        basis,
        coefs,
        grid,
        values,
        rss,
    })
}

/// Analytic derivative curves on the same grid.
pub fn differentiate(s: &SmoothedCurves) -> Result<SmoothedCurves> {
    let mut coefs = DMatrix::zeros(s.n(), s.basis.dim().saturating_sub(1));
    let mut basis = None;
    for i in 0..s.n() {
        let (db, dc) = s.basis.derivative(&s.coefs.row(i).transpose())?;
        coefs.set_row(i, &dc.transpose());
        basis = Some(db);
    }
    let basis = match basis {
        Some(b) => b,
        None => s.basis.derivative(&DVector::zeros(s.basis.dim()))?.0,
    };
    let values = &coefs * basis.design(&s.grid.points).transpose();
    Ok(SmoothedCurves {
        ids: s.ids.clone(),
        basis,
        coefs,
        grid: s.grid.clone(),
        values,
        rss: vec![0.0; s.n()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_weights_sum_to_length() {
        let g = Grid::uniform(3.0, 12.0, 201).unwrap();
        assert_relative_eq!(g.weights.iter().sum::<f64>(), 9.0, epsilon = 1e-12);
        assert_eq!(g.points[200], 12.0);
        assert!(Grid::uniform(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn curve_validation() {
        let ids = vec!["a".to_string()];
        assert!(CurveSample::new(ids.clone(), vec![vec![0.0, 0.0]], vec![vec![1.0, 2.0]], 0.0, 1.0).is_err());
        assert!(CurveSample::new(ids.clone(), vec![vec![0.0, 2.0]], vec![vec![1.0, 2.0]], 0.0, 1.0).is_err());
        assert!(CurveSample::new(ids.clone(), vec![vec![0.0, 1.0]], vec![vec![1.0]], 0.0, 1.0).is_err());
        assert!(CurveSample::new(ids, vec![vec![0.0, 1.0]], vec![vec![1.0, f64::NAN]], 0.0, 1.0).is_err());
    }

    #[test]
    fn quantile_knots_are_interior() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let raw = CurveSample::new(vec!["a".into()], vec![t.clone()], vec![t], 0.0, 10.0).unwrap();
        let k = interior_knots(&raw, &KnotSpec::Count(3)).unwrap();
        assert_eq!(k, vec![2.5, 5.0, 7.5]);
        assert_eq!(interior_knots(&raw, &KnotSpec::Pooled).unwrap().len(), 9);
    }

    #[test]
    fn underdetermined_curve_names_subject() {
        let raw = CurveSample::new(
            vec!["s1".into(), "s2".into()],
            vec![vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], vec![0.0, 3.0]],
            vec![vec![0.0; 7], vec![1.0, 1.0]],
            0.0,
            3.0,
        )
        .unwrap();
        let opts = SmoothingOptions {
            order: 4,
            knots: KnotSpec::Count(1),
            ..Default::default()
        };
        match smooth_curves(&raw, &opts) {
            Err(FunctionalError::InsufficientObservations { subject, have, need }) => {
                assert_eq!((subject.as_str(), have, need), ("s2", 2, 5));
            }
            other => panic!("{other:?}"),
        }
    }
}
