//! Four two-group simulation designs with p = 2 covariates.

use std::sync::OnceLock;

use mixreg_core::rng::derive_seed;
use mixreg_core::{sample, Component, Dataset, Gaussian, MixtureModel, ModelKind, Regression};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

const FIXTURE: &str = include_str!("../fixtures/scenarios.json");

#[derive(Debug, Deserialize)]
struct FixtureComponent {
    alpha: f64,
    beta: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct FixtureScenario {
    id: u32,
    label: String,
    components: Vec<FixtureComponent>,
}

#[derive(Debug, Deserialize)]
struct Fixture {
    version: u32,
    pi: Vec<f64>,
    sigma2: Vec<f64>,
    test_n: usize,
    scenarios: Vec<FixtureScenario>,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(FIXTURE).expect("bundled scenario fixture parses"))
}

/// Version tag of the bundled scenario parameters.
pub fn fixture_version() -> u32 {
    fixture().version
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u32,
    pub label: String,
    pub model: MixtureModel,
    pub train_n: usize,
    pub test_n: usize,
}

impl Scenario {
    pub fn new(id: u32, train_n: usize) -> Result<Self> {
        let fx = fixture();
        let sc = fx
            .scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or(HarnessError::UnknownScenario(id))?;
        let mut comps = Vec::with_capacity(sc.components.len());
        for (c, s2) in sc.components.iter().zip(&fx.sigma2) {
            let p = c.mu.len();
            if c.beta.len() != p || c.sigma.len() != p || c.sigma.iter().any(|r| r.len() != p) {
                return Err(HarnessError::Fixture(format!("scenario {id}: inconsistent dimensions")));
            }
            let cov = DMatrix::from_fn(p, p, |i, j| c.sigma[i][j]);
            comps.push(Component::jmr(
                Regression::new(c.alpha, DVector::zeros(0), DVector::from_vec(c.beta.clone()), *s2)?,
                Gaussian::new(DVector::from_vec(c.mu.clone()), cov)?,
            ));
        }
        Ok(Self {
            id,
            label: sc.label.clone(),
            model: MixtureModel::new(ModelKind::Jmr, fx.pi.clone(), comps)?,
            train_n,
            test_n: fx.test_n,
        })
    }

    /// Independent training and test samples; the test sample has `test_n` rows.
    pub fn draw(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let train = sample(&self.model, self.train_n, derive_seed(seed, 0))?;
        let test = sample(&self.model, self.test_n, derive_seed(seed, 1))?;
        Ok((train, test))
    }
}

pub fn make_scenario(id: u32, train_n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    Scenario::new(id, train_n)?.draw(seed)
}
