//! Leave-one-out cross validation for scalar and functional designs, and
//! CV restricted to confidently classified subjects.

use mixreg_core::rng::derive_seed;
use mixreg_core::{fit, fit_mbc, fit_ols, predict, Dataset, FitConfig, ModelKind};
use mixreg_functional::{assemble_design, fpca, project_scores, SmoothedCurves, SubjectValues};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::benchmark::Method;
use crate::error::{HarnessError, Result};

/// Smoothed curves plus scalar columns keyed by the curves' subject ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalInputs {
    pub curves: SmoothedCurves,
    /// Number of eigenfunctions kept.
    pub m: usize,
    /// Optional endpoint covariate, entered as an invariant column.
    pub endpoint: Option<SubjectValues>,
    pub invariants: Vec<SubjectValues>,
    pub y: SubjectValues,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CvInput {
    Design(Dataset),
    /// FPCA is recomputed inside every fold.
    Functional(FunctionalInputs),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvResult {
    pub method: Method,
    pub k: usize,
    pub y: Vec<f64>,
    /// Ŷ_(−i), absent when fold i failed.
    pub predictions: Vec<Option<f64>>,
    /// Largest membership posterior of the held-out subject (mixtures only).
    pub top_posteriors: Vec<Option<f64>>,
    /// (subject index, error message) for failed folds.
    pub failures: Vec<(usize, String)>,
    /// Mean squared error over successful folds.
    pub cv: Option<f64>,
}

impl LoocvResult {
    pub fn successes(&self) -> usize {
        self.predictions.iter().filter(|p| p.is_some()).count()
    }

    pub fn squared_errors(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.predictions.iter().zip(&self.y).map(|(p, y)| p.map(|v| (y - v).powi(2)))
    }
}

struct FoldPrediction {
    yhat: f64,
    top_posterior: Option<f64>,
}

fn fit_and_predict(
    train: &Dataset,
    x: &DVector<f64>,
    z: &DVector<f64>,
    method: Method,
    k: usize,
    cfg: &FitConfig,
) -> Result<FoldPrediction> {
    let model = match method {
        Method::Ols => {
            let ols = fit_ols(train)?;
            return Ok(FoldPrediction {
                yhat: ols.predict(x.as_slice(), z.as_slice()),
                top_posterior: None,
            });
        }
        Method::Omr => fit(train, k, ModelKind::Omr, cfg)?.model,
        Method::Jmr => fit(train, k, ModelKind::Jmr, cfg)?.model,
        Method::Mbc => fit_mbc(train, k, cfg)?.model,
    };
    let pr = predict(&model, x, Some(z))?;
    Ok(FoldPrediction {
        yhat: pr.yhat,
        top_posterior: Some(pr.top_posterior),
    })
}

fn subset(v: &SubjectValues, idx: &[usize]) -> SubjectValues {
    SubjectValues {
        ids: idx.iter().map(|&i| v.ids[i].clone()).collect(),
        values: idx.iter().map(|&i| v.values[i]).collect(),
    }
}

fn functional_fold(
    f: &FunctionalInputs,
    i: usize,
    method: Method,
    k: usize,
    cfg: &FitConfig,
) -> Result<FoldPrediction> {
    let n = f.curves.n();
    let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let train_curves = f.curves.select(&keep);
    let eig = fpca(&train_curves, f.m)?;
    let train_scores = project_scores(&train_curves, &eig)?;
    let endpoint = f.endpoint.as_ref().map(|e| subset(e, &keep));
    let invariants: Vec<SubjectValues> = f.invariants.iter().map(|v| subset(v, &keep)).collect();
    let train = assemble_design(&train_scores, endpoint.as_ref(), &invariants, &subset(&f.y, &keep))?;
    let held_out = project_scores(&f.curves.select(&[i]), &eig)?;
    let x = held_out.scores.row(0).transpose();
    let z: Vec<f64> = f
        .endpoint
        .iter()
        .chain(&f.invariants)
        .map(|c| c.values[i])
        .collect();
    fit_and_predict(&train, &x, &DVector::from_vec(z), method, k, cfg)
}

/// Leave-one-out CV: each subject is predicted from a fit on all others.
/// Fold `i` fits with seed `derive_seed(cfg.seed, i)`.
pub fn loocv(input: &CvInput, method: Method, k: usize, cfg: &FitConfig) -> Result<LoocvResult> {
    let k = if method == Method::Ols { 1 } else { k };
    if k == 0 {
        return Err(HarnessError::InvalidArgument("k must be positive".into()));
    }
    let (n, p, q, y) = match input {
        CvInput::Design(d) => (d.n(), d.p(), d.q(), d.y.iter().copied().collect::<Vec<_>>()),
        CvInput::Functional(f) => {
            // validates subject order once, before any fold runs
            let full = assemble_design(
                &mixreg_functional::ScoreDesign {
                    ids: f.curves.ids.clone(),
                    scores: nalgebra::DMatrix::zeros(f.curves.n(), f.m),
                },
                f.endpoint.as_ref(),
                &f.invariants,
                &f.y,
            )?;
            (full.n(), full.p(), full.q(), f.y.values.clone())
        }
    };
    let need = k * (p + q + 2) + 1;
    if n < need {
        return Err(HarnessError::TooFewSubjects { n, need });
    }
    let folds: Vec<Result<FoldPrediction>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fold_cfg = FitConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            match input {
                CvInput::Design(d) => {
                    fit_and_predict(&d.without(i), &d.x_row(i), &d.z_row(i), method, k, &fold_cfg)
                }
                CvInput::Functional(f) => functional_fold(f, i, method, k, &fold_cfg),
            }
        })
        .collect();
    let mut predictions = Vec::with_capacity(n);
    let mut top_posteriors = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, fold) in folds.into_iter().enumerate() {
        match fold {
            Ok(fp) => {
                predictions.push(Some(fp.yhat));
                top_posteriors.push(fp.top_posterior);
            }
            Err(e) => {
                predictions.push(None);
                top_posteriors.push(None);
                failures.push((i, e.to_string()));
            }
        }
    }
    let mut result = LoocvResult {
        method,
        k,
        y,
        predictions,
        top_posteriors,
        failures,
        cv: None,
    };
    let errs: Vec<f64> = result.squared_errors().flatten().collect();
    if !errs.is_empty() {
        result.cv = Some(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPoint {
    pub threshold: f64,
    /// Absent when no subject clears the threshold.
    pub cv: Option<f64>,
    pub retained: usize,
}

/// 0.50, 0.55, …, 0.80.
pub fn default_thresholds() -> Vec<f64> {
    (0..=6).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// CV over held-out subjects whose largest posterior is at least `t`.
pub fn cv_threshold_curve(res: &LoocvResult, thresholds: &[f64]) -> Result<Vec<ThresholdPoint>> {
    if !res.method.clusters() {
        return Err(HarnessError::InvalidArgument(format!(
            "{} produces no membership posteriors",
            res.method
        )));
    }
    let errors: Vec<Option<f64>> = res.squared_errors().collect();
    thresholds
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(HarnessError::InvalidArgument(format!("threshold {t} outside [0, 1]")));
            }
            let kept: Vec<f64> = errors
                .iter()
                .zip(&res.top_posteriors)
                .filter_map(|(e, p)| match (e, p) {
                    (Some(e), Some(p)) if *p >= t => Some(*e),
                    _ => None,
                })
                .collect();
            Ok(ThresholdPoint {
                threshold: t,
                cv: (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64),
                retained: kept.len(),
            })
        })
        .collect()
}

/// Per-subject CSV: subject,y,prediction,top_posterior,status.
pub fn loocv_to_csv(res: &LoocvResult, ids: Option<&[String]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "y", "prediction", "top_posterior", "status"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for i in 0..res.y.len() {
        let subject = ids.map_or_else(|| (i + 1).to_string(), |ids| ids[i].clone());
        let status = if res.predictions[i].is_some() { "ok" } else { "failed" };
        w.write_record([
            subject,
            res.y[i].to_string(),
            opt(res.predictions[i]),
            opt(res.top_posteriors[i]),
            status.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Threshold-curve CSV: threshold,cv,retained.
pub fn threshold_curve_to_csv(points: &[ThresholdPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "cv", "retained"])?;
    for p in points {
        w.write_record([
            p.threshold.to_string(),
            p.cv.map(|v| v.to_string()).unwrap_or_default(),
            p.retained.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
