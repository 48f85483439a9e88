//! JSON documents for fitted models, eigen-systems and MSPE reports.
//! Every real number is stored as a decimal string that parses back to
//! the identical `f64`.

use std::fmt;

use mixreg_core::mspe::{McEstimate, MspeReport};
use mixreg_core::{Component, Gaussian, MixtureModel, ModelKind, Regression};
use mixreg_functional::{EigenSystem, Grid};
use nalgebra::{DMatrix, DVector};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A finite `f64` serialized as its shortest round-trip decimal string.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

struct NumVisitor;

impl Visitor<'_> for NumVisitor {
    type Value = Num;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a finite decimal number as a string")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Num(x)),
            _ => Err(E::custom(format!("invalid number {v:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Num, D::Error> {
        d.deserialize_str(NumVisitor)
    }
}

fn nums(v: impl IntoIterator<Item = f64>) -> Vec<Num> {
    v.into_iter().map(Num).collect()
}

fn vals(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDoc {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma2: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu: Option<Vec<Num>>,
    /// Row-major lower triangle of Σ.
    #[serde(rename = "Sigma", skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDoc {
    pub grid: Vec<Num>,
    pub weights: Vec<Num>,
    pub mean: Vec<Num>,
    pub eigenvalues: Vec<Num>,
    pub cumulative_variance: Vec<Num>,
    /// One array of grid values per eigenfunction.
    pub eigenfunctions: Vec<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    /// Decimal string: seeds use the full u64 range.
    pub seed: String,
    pub loglik: Num,
    pub bic: Num,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub kind: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub pi: Vec<Num>,
    pub components: Vec<ComponentDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigen: Option<EigenDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitMeta>,
}

fn lower_triangle(m: &DMatrix<f64>) -> Vec<Num> {
    let p = m.nrows();
    (0..p).flat_map(|i| (0..=i).map(move |j| Num(m[(i, j)]))).collect()
}

fn from_lower_triangle(v: &[Num], p: usize) -> Result<DMatrix<f64>> {
    if v.len() != p * (p + 1) / 2 {
        return Err(CliError::Data(format!(
            "Sigma has {} entries, expected {} for p = {p}",
            v.len(),
            p * (p + 1) / 2
        )));
    }
    let mut m = DMatrix::zeros(p, p);
    let mut it = v.iter();
    for i in 0..p {
        for j in 0..=i {
            let x = it.next().expect("length checked").0;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}

impl EigenDoc {
    pub fn from_system(e: &EigenSystem) -> Self {
        Self {
            grid: nums(e.grid.points.iter().copied()),
            weights: nums(e.grid.weights.iter().copied()),
            mean: nums(e.mean.iter().copied()),
            eigenvalues: nums(e.eigenvalues.iter().copied()),
            cumulative_variance: nums(e.cumulative_variance.iter().copied()),
            eigenfunctions: e
                .eigenfunctions
                .column_iter()
                .map(|c| nums(c.iter().copied()))
                .collect(),
        }
    }

    pub fn to_system(&self) -> Result<EigenSystem> {
        let g = self.grid.len();
        let m = self.eigenfunctions.len();
        if self.weights.len() != g || self.mean.len() != g || self.eigenfunctions.iter().any(|f| f.len() != g) {
            return Err(CliError::Data("eigen block: arrays disagree with the grid length".into()));
        }
        if self.eigenvalues.len() != m || self.cumulative_variance.len() != m {
            return Err(CliError::Data("eigen block: eigenvalue count disagrees with eigenfunctions".into()));
        }
        Ok(EigenSystem {
            grid: Grid {
                points: vals(&self.grid),
                weights: vals(&self.weights),
            },
            mean: DVector::from_vec(vals(&self.mean)),
            eigenvalues: vals(&self.eigenvalues),
            eigenfunctions: DMatrix::from_fn(g, m, |r, c| self.eigenfunctions[c][r].0),
            cumulative_variance: vals(&self.cumulative_variance),
        })
    }
}

impl ModelDocument {
    pub fn from_model(m: &MixtureModel) -> Self {
        let components = m
            .components()
            .iter()
            .map(|c| {
                let r = c.regression.as_ref();
                let g = c.covariate.as_ref();
                ComponentDoc {
                    alpha: r.map(|r| Num(r.alpha)),
                    zeta: r.map(|r| nums(r.zeta.iter().copied())),
                    beta: r.map(|r| nums(r.beta.iter().copied())),
                    sigma2: r.map(|r| Num(r.sigma2)),
                    mu: g.map(|g| nums(g.mean().iter().copied())),
                    sigma: g.map(|g| lower_triangle(g.cov())),
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            kind: m.kind().as_str().to_string(),
            k: m.k(),
            p: m.p(),
            q: m.q(),
            pi: nums(m.weights().iter().copied()),
            components,
            eigen: None,
            fit: None,
        }
    }

    pub fn to_model(&self) -> Result<MixtureModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let kind: ModelKind = self
            .kind
            .parse()
            .map_err(|_| CliError::Data(format!("unknown model kind {:?}", self.kind)))?;
        if self.components.len() != self.k || self.pi.len() != self.k {
            return Err(CliError::Data(format!(
                "K = {} but {} components and {} mixing proportions",
                self.k,
                self.components.len(),
                self.pi.len()
            )));
        }
        let missing = |what: &str, k: usize| CliError::Data(format!("component {}: missing {what}", k + 1));
        let mut comps = Vec::with_capacity(self.k);
        for (k, c) in self.components.iter().enumerate() {
            let regression = if kind.has_regression() {
                let beta = vals(c.beta.as_ref().ok_or_else(|| missing("beta", k))?);
                let zeta = vals(c.zeta.as_deref().unwrap_or(&[]));
                if beta.len() != self.p || zeta.len() != self.q {
                    return Err(CliError::Data(format!("component {}: slope dimensions disagree with p, q", k + 1)));
                }
                Some(Regression::new(
                    c.alpha.ok_or_else(|| missing("alpha", k))?.0,
                    DVector::from_vec(zeta),
                    DVector::from_vec(beta),
                    c.sigma2.ok_or_else(|| missing("sigma2", k))?.0,
                )?)
            } else {
                None
            };
            let covariate = if kind.has_covariate() {
                let mu = vals(c.mu.as_ref().ok_or_else(|| missing("mu", k))?);
                if mu.len() != self.p {
                    return Err(CliError::Data(format!("component {}: mu has length {}", k + 1, mu.len())));
                }
                let cov = from_lower_triangle(c.sigma.as_ref().ok_or_else(|| missing("Sigma", k))?, self.p)?;
                Some(Gaussian::new(DVector::from_vec(mu), cov)?)
            } else {
                None
            };
            comps.push(match (regression, covariate) {
                (Some(r), Some(g)) => Component::jmr(r, g),
                (Some(r), None) => Component::omr(r),
                (None, Some(g)) => Component::gmm(g),
                (None, None) => unreachable!("every kind has a block"),
            });
        }
        Ok(MixtureModel::new(kind, vals(&self.pi), comps)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("model JSON: {e}")))
    }
}

/// Stand-alone eigen-system file written by `fpca`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenFile {
    pub schema_version: u32,
    pub derivative: bool,
    pub order: usize,
    #[serde(flatten)]
    pub eigen: EigenDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub mean: Num,
    pub std_error: Num,
}

impl From<&McEstimate> for EstimateDoc {
    fn from(e: &McEstimate) -> Self {
        Self {
            mean: Num(e.mean),
            std_error: Num(e.std_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspeDoc {
    pub schema_version: u32,
    pub sigma_bar: Num,
    pub excess_adaptive: EstimateDoc,
    pub excess_fixed: EstimateDoc,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excess_biased: Option<EstimateDoc>,
    /// σ̄ + excess, the full prediction errors.
    pub mspe_adaptive: Num,
    pub mspe_fixed: Num,
    pub mc_n: usize,
    pub seed: String,
}

impl MspeDoc {
    pub fn from_report(r: &MspeReport, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sigma_bar: Num(r.sigma_bar),
            excess_adaptive: (&r.excess_adaptive).into(),
            excess_fixed: (&r.excess_fixed).into(),
            excess_biased: r.excess_biased.as_ref().map(Into::into),
            mspe_adaptive: Num(r.sigma_bar + r.excess_adaptive.mean),
            mspe_fixed: Num(r.sigma_bar + r.excess_fixed.mean),
            mc_n: r.mc_n,
            seed: seed.to_string(),
        }
    }
}
