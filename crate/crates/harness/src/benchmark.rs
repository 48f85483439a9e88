//! Replicated four-method comparison on the simulation scenarios.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use mixreg_core::rng::derive_seed;
use mixreg_core::{fit, fit_mbc, fit_ols, predict, Dataset, FitConfig, MixtureModel, ModelKind};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::metrics::misclassification_rate;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ols,
    Omr,
    Jmr,
    Mbc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ols, Method::Omr, Method::Jmr, Method::Mbc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::Omr => "OMR",
            Method::Jmr => "JMR",
            Method::Mbc => "MBC",
        }
    }

    /// Whether the method produces cluster memberships.
    pub fn clusters(self) -> bool {
        self != Method::Ols
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "pcr" => Ok(Method::Ols),
            "omr" => Ok(Method::Omr),
            "jmr" => Ok(Method::Jmr),
            "mbc" => Ok(Method::Mbc),
            other => Err(HarnessError::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub fit: FitConfig,
    /// Largest tolerated fraction of dropped replicates.
    pub max_failure_rate: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            max_failure_rate: 0.05,
        }
    }
}

/// One method's outcome on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub method: Method,
    pub mspe: f64,
    pub mcr: Option<f64>,
    /// (parameter name, squared error) after label alignment.
    pub squared_errors: Vec<(String, f64)>,
}

/// All four methods on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mspe: f64,
    pub mcr: Option<f64>,
    /// (parameter name, root mean squared error).
    pub rmse: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub scenario: u32,
    pub n: usize,
    pub seed: u64,
    /// Replicates that entered the averages.
    pub replicates: usize,
    /// Replicates dropped because some method failed to fit.
    pub failures: usize,
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkTable {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Permutation of `fitted` components that best matches `truth` in summed
/// squared slope error.
pub fn align_to_truth(fitted: &MixtureModel, truth: &MixtureModel) -> Vec<usize> {
    let k = fitted.k();
    let slope = |m: &MixtureModel, c: usize| m.component(c).regression.as_ref().map(|r| r.beta.clone());
    (0..k)
        .permutations(k)
        .map(|perm| {
            let cost: f64 = perm
                .iter()
                .enumerate()
                .map(|(t, &f)| match (slope(fitted, f), slope(truth, t)) {
                    (Some(a), Some(b)) if a.len() == b.len() => (a - b).norm_squared(),
                    _ => 0.0,
                })
                .sum();
            (perm, cost)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .unwrap_or_default()
}

/// Squared errors of π₁, α_k, β_kj and σ²_k after alignment; names are 1-based.
pub fn parameter_errors(fitted: &MixtureModel, truth: &MixtureModel) -> Vec<(String, f64)> {
    if fitted.k() != truth.k() {
        return Vec::new();
    }
    let perm = align_to_truth(fitted, truth);
    let m = fitted.permuted(&perm);
    let mut out = vec![("pi1".to_string(), (m.weights()[0] - truth.weights()[0]).powi(2))];
    let pairs: Vec<_> = (0..m.k())
        .filter_map(|k| Some((k, m.component(k).regression.as_ref()?, truth.component(k).regression.as_ref()?)))
        .collect();
    for &(k, f, t) in &pairs {
        out.push((format!("alpha{}", k + 1), (f.alpha - t.alpha).powi(2)));
    }
    for &(k, f, t) in &pairs {
        for (j, (a, b)) in f.beta.iter().zip(t.beta.iter()).enumerate() {
            out.push((format!("beta{}{}", k + 1, j + 1), (a - b).powi(2)));
        }
    }
    for &(k, f, t) in &pairs {
        out.push((format!("sigma2_{}", k + 1), (f.sigma2 - t.sigma2).powi(2)));
    }
    out
}

fn test_mspe(test: &Dataset, f: impl Fn(usize) -> mixreg_core::Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..test.n() {
        total += (test.y[i] - f(i)?).powi(2);
    }
    Ok(total / test.n() as f64)
}

fn mixture_record(
    method: Method,
    model: &MixtureModel,
    labels: &[usize],
    train: &Dataset,
    test: &Dataset,
    truth: &MixtureModel,
) -> Result<MethodRecord> {
    let mspe = test_mspe(test, |i| Ok(predict(model, &test.x_row(i), Some(&test.z_row(i)))?.yhat))?;
    let mcr = match &train.truth {
        Some(t) => Some(misclassification_rate(labels, t, model.k().max(truth.k()))?),
        None => None,
    };
    Ok(MethodRecord {
        method,
        mspe,
        mcr,
        squared_errors: parameter_errors(model, truth),
    })
}

/// Fits OLS, OMR, JMR and MBC (K = truth's K) on `train` and scores them
/// on `test`. Any method's failure fails the replicate.
pub fn evaluate_replicate(
    train: &Dataset,
    test: &Dataset,
    truth: &MixtureModel,
    cfg: &FitConfig,
) -> Result<ReplicateRecord> {
    let k = truth.k();
    let ols = fit_ols(train)?;
    let ols_rec = MethodRecord {
        method: Method::Ols,
        mspe: test_mspe(test, |i| {
            Ok(ols.predict(test.x_row(i).as_slice(), test.z_row(i).as_slice()))
        })?,
        mcr: None,
        squared_errors: Vec::new(),
    };
    let omr = fit(train, k, ModelKind::Omr, cfg)?;
    let jmr = fit(train, k, ModelKind::Jmr, cfg)?;
    let mbc = fit_mbc(train, k, cfg)?;
    Ok(ReplicateRecord {
        methods: vec![
            ols_rec,
            mixture_record(Method::Omr, &omr.model, &omr.tau.hard_labels(), train, test, truth)?,
            mixture_record(Method::Jmr, &jmr.model, &jmr.tau.hard_labels(), train, test, truth)?,
            mixture_record(Method::Mbc, &mbc.model, &mbc.labels, train, test, truth)?,
        ],
    })
}

/// Averages replicate records in index order. Failed replicates are
/// dropped and counted; more than `max_failure_rate` of them is an error.
pub fn aggregate(
    scenario: u32,
    n: usize,
    seed: u64,
    outcomes: &[Result<ReplicateRecord>],
    max_failure_rate: f64,
) -> Result<BenchmarkTable> {
    let total = outcomes.len();
    let ok: Vec<&ReplicateRecord> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = total - ok.len();
    if total == 0 || ok.is_empty() || failures as f64 > max_failure_rate * total as f64 {
        return Err(HarnessError::TooManyFailures {
            failed: failures,
            total,
            limit: 100.0 * max_failure_rate,
        });
    }
    let reps = ok.len() as f64;
    let methods = (0..ok[0].methods.len())
        .map(|j| {
            let first = &ok[0].methods[j];
            let mspe = ok.iter().map(|r| r.methods[j].mspe).sum::<f64>() / reps;
            let mcr = first
                .mcr
                .map(|_| ok.iter().map(|r| r.methods[j].mcr.unwrap_or(0.0)).sum::<f64>() / reps);
            let rmse = first
                .squared_errors
                .iter()
                .enumerate()
                .map(|(e, (name, _))| {
                    let mse = ok.iter().map(|r| r.methods[j].squared_errors[e].1).sum::<f64>() / reps;
                    (name.clone(), mse.sqrt())
                })
                .collect();
            MethodSummary {
                method: first.method,
                mspe,
                mcr,
                rmse,
            }
        })
        .collect();
    Ok(BenchmarkTable {
        scenario,
        n,
        seed,
        replicates: ok.len(),
        failures,
        methods,
    })
}

/// Seed of replicate `r` of (`scenario`, `n`) under the run seed.
pub fn replicate_seed(seed: u64, scenario: u32, n: usize, r: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, scenario as u64), n as u64), r as u64)
}

/// One table per (scenario, n), replicates run in parallel.
pub fn run_benchmark(
    ids: &[u32],
    ns: &[usize],
    reps: usize,
    seed: u64,
    cfg: &BenchmarkConfig,
) -> Result<Vec<BenchmarkTable>> {
    if reps < 1 {
        return Err(HarnessError::InvalidArgument("reps must be at least 1".into()));
    }
    let mut tables = Vec::new();
    for &id in ids {
        for &n in ns {
            let scenario = Scenario::new(id, n)?;
            let outcomes: Vec<Result<ReplicateRecord>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let rs = replicate_seed(seed, id, n, r);
                    let (train, test) = scenario.draw(rs)?;
                    let fit_cfg = FitConfig {
                        seed: derive_seed(rs, 2),
                        ..cfg.fit.clone()
                    };
                    evaluate_replicate(&train, &test, &scenario.model, &fit_cfg)
                })
                .collect();
            tables.push(aggregate(id, n, seed, &outcomes, cfg.max_failure_rate)?);
        }
    }
    Ok(tables)
}

/// Long-format CSV: scenario,n,method,metric,value,replicates,seed.
pub fn tables_to_csv(tables: &[BenchmarkTable]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "n", "method", "metric", "value", "replicates", "seed"])?;
    for t in tables {
        for s in &t.methods {
            let mut row = |metric: &str, value: f64| {
                w.write_record([
                    t.scenario.to_string(),
                    t.n.to_string(),
                    s.method.to_string(),
                    metric.to_string(),
                    value.to_string(),
                    t.replicates.to_string(),
                    t.seed.to_string(),
                ])
            };
            row("mspe", s.mspe)?;
            if let Some(m) = s.mcr {
                row("mcr", m)?;
            }
            for (name, v) in &s.rmse {
                row(&format!("rmse_{name}"), *v)?;
            }
            row("failed_replicates", t.failures as f64)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
