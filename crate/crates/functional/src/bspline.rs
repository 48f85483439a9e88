//! B-spline bases via the Cox–de Boor recursion.

use nalgebra::{DMatrix, DVector};

use crate::error::{FunctionalError, Result};

/// B-spline basis of a given order (degree + 1) on `[a, b]` with clamped
/// boundary knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    order: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Clamped basis with `order` copies of each boundary and the given
    /// interior knots (which must lie strictly inside `(a, b)`).
    pub fn new(order: usize, interior: &[f64], a: f64, b: f64) -> Result<Self> {
        if order == 0 {
            return Err(FunctionalError::InvalidOrder(order));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(FunctionalError::InvalidKnots(format!("bad interval [{a}, {b}]")));
        }
        if interior.windows(2).any(|w| w[0] > w[1]) {
            return Err(FunctionalError::InvalidKnots("interior knots not sorted".into()));
        }
        if interior.iter().any(|&t| !(t > a && t < b)) {
            return Err(FunctionalError::InvalidKnots("interior knot outside (a, b)".into()));
        }
        let mut knots = vec![a; order];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(b, order));
        Self::from_knots(order, knots)
    }

    /// Basis from a full knot vector of length `dim + order`.
    pub fn from_knots(order: usize, knots: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(FunctionalError::InvalidOrder(order));
        }
        if knots.len() < 2 * order || knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(FunctionalError::InvalidKnots("knot vector too short or unsorted".into()));
        }
        if knots[order - 1] >= knots[knots.len() - order] {
            return Err(FunctionalError::InvalidKnots("empty domain".into()));
        }
        Ok(Self { order, knots })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order - 1], self.knots[self.dim()])
    }

    /// Knot span index `s` with `knots[s] <= t < knots[s+1]`; the right end
    /// of the domain belongs to the last non-empty span.
    fn span(&self, t: f64) -> usize {
        let (k, n) = (self.order, self.dim());
        if t >= self.knots[n] {
            let mut s = n - 1;
            while self.knots[s] >= self.knots[s + 1] {
                s -= 1;
            }
            return s;
        }
        if t <= self.knots[k - 1] {
            return k - 1;
        }
        // knots[k-1] < t < knots[n]
        let (mut lo, mut hi) = (k - 1, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Values of all basis functions at `t` (clamped into the domain).
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (a, b) = self.domain();
        let t = t.clamp(a, b);
        let k = self.order;
        let s = self.span(t);
        // de Boor triangle for the k functions nonzero on span s
        let mut vals = vec![0.0; k];
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        vals[0] = 1.0;
        for j in 1..k {
            left[j] = t - self.knots[s + 1 - j];
            right[j] = self.knots[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = if denom > 0.0 { vals[r] / denom } else { 0.0 };
                vals[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            vals[j] = saved;
        }
        let mut out = DVector::zeros(self.dim());
        for (r, v) in vals.into_iter().enumerate() {
            out[s + 1 - k + r] = v;
        }
        out
    }

    /// Collocation matrix, one row per point.
    pub fn design(&self, points: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(points.len(), self.dim());
        for (i, &t) in points.iter().enumerate() {
            m.set_row(i, &self.eval(t).transpose());
        }
        m
    }

    /// Basis and coefficients of the derivative of `Σ c_i B_i`.
    pub fn derivative(&self, coefs: &DVector<f64>) -> Result<(BSplineBasis, DVector<f64>)> {
        let k = self.order;
        if k < 2 {
            return Err(FunctionalError::InvalidOrder(k));
        }
        let n = self.dim();
        let t = &self.knots;
        let d = DVector::from_fn(n - 1, |i, _| {
            let denom = t[i + k] - t[i + 1];
            if denom > 0.0 {
                (k - 1) as f64 * (coefs[i + 1] - coefs[i]) / denom
            } else {
                0.0
            }
        });
        let basis = BSplineBasis::from_knots(k - 1, t[1..t.len() - 1].to_vec())?;
        Ok((basis, d))
    }
}
