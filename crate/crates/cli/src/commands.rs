//! Subcommand definitions and handlers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixreg_core::mspe::mspe_report;
use mixreg_core::{assign_cluster, fit, predict, select_k, FitConfig, FitResult, ModelKind};
use mixreg_functional::{
    differentiate, fpca, project_scores, smooth_curves, KnotSpec, SmoothedCurves, SmoothingOptions, SubjectValues,
};
use mixreg_harness::{
    cv_threshold_curve, default_thresholds, loocv, loocv_to_csv, make_scenario, run_benchmark, tables_to_csv,
    BenchmarkConfig, CvInput, FunctionalInputs, Method,
};

use crate::csvio::{dataset_to_csv, read_curves, read_dataset, read_subject_table, rows_to_csv};
use crate::document::{EigenDoc, EigenFile, FitMeta, ModelDocument, MspeDoc, Num, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::output::atomic_write;

#[derive(Debug, Parser)]
#[command(name = "mixreg", version, about = "Mixture regression with random covariates")]
pub struct Cli {
    /// TOML file of flag values for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MIXREG_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a JMR or OMR model to a dataset CSV.
    Fit(FitArgs),
    /// Posterior-weighted predictions for new covariates.
    Predict(PredictArgs),
    /// Hard cluster assignments for the rows of a dataset.
    Cluster(PredictArgs),
    /// Draw a dataset from a simulation scenario.
    Simulate(SimulateArgs),
    /// Replicated OLS/OMR/JMR/MBC comparison.
    Benchmark(BenchmarkArgs),
    /// Smooth curves and compute functional principal components.
    Fpca(FpcaArgs),
    /// Leave-one-out cross validation.
    Cv(CvArgs),
    /// Monte Carlo prediction-error report for a JMR model.
    Mspe(MspeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Jmr,
    Omr,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Jmr => ModelKind::Jmr,
            KindArg::Omr => ModelKind::Omr,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Ols,
    Pcr,
    Omr,
    Jmr,
    Mbc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ols | MethodArg::Pcr => Method::Ols,
            MethodArg::Omr => Method::Omr,
            MethodArg::Jmr => Method::Jmr,
            MethodArg::Mbc => Method::Mbc,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

impl EmArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            n_restarts: self.restarts,
            seed: self.seed,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "jmr")]
    pub kind: KindArg,
    /// Number of components (default 2 unless --k-max is given).
    #[arg(long, conflicts_with = "k_max")]
    pub k: Option<usize>,
    /// Select K in 1..=k-max by BIC.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Columns that enter the regression only.
    #[arg(long, value_delimiter = ',')]
    pub invariant_cols: Vec<String>,
    #[command(flatten)]
    pub em: EmArgs,
    /// Eigen-system JSON (from `fpca`) to embed in the model document.
    #[arg(long)]
    pub eigen: Option<PathBuf>,
    /// Per-K BIC table (with --k-max).
    #[arg(long)]
    pub bic_report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub invariant_cols: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub scenarios: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "100,300")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Spline order (degree + 1).
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    /// Number of evaluation grid points.
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Interior knot count at pooled-time quantiles (default: every pooled time).
    #[arg(long)]
    pub knots: Option<usize>,
    /// Domain "a,b" (default: observed range).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub domain: Option<Vec<f64>>,
    /// Use derivative curves as the functional covariate.
    #[arg(long)]
    pub derivative: bool,
    /// Add the smoothed curve value at the right end as an invariant column.
    #[arg(long)]
    pub endpoint_as_invariant: bool,
}

impl SmoothArgs {
    fn options(&self) -> SmoothingOptions {
        SmoothingOptions {
            order: self.order,
            knots: self.knots.map_or(KnotSpec::Pooled, KnotSpec::Count),
            grid_points: self.grid,
        }
    }

    fn domain(&self) -> Result<Option<(f64, f64)>> {
        match self.domain.as_deref() {
            None => Ok(None),
            Some([a, b]) => Ok(Some((*a, *b))),
            Some(_) => Err(CliError::Usage("--domain takes two numbers a,b".into())),
        }
    }

    /// Functional covariate curves and the optional endpoint column.
    fn prepare(&self, curves: &Path) -> Result<(SmoothedCurves, Option<SubjectValues>)> {
        let raw = read_curves(curves, self.domain()?)?;
        let smoothed = smooth_curves(&raw, &self.options())?;
        let endpoint = self
            .endpoint_as_invariant
            .then(|| SubjectValues::new(smoothed.ids.clone(), smoothed.endpoint_values()))
            .transpose()?;
        let covariate = if self.derivative {
            differentiate(&smoothed)?
        } else {
            smoothed
        };
        Ok((covariate, endpoint))
    }
}

#[derive(Debug, Args)]
pub struct FpcaArgs {
    #[arg(long)]
    pub curves: PathBuf,
    /// Number of eigenfunctions.
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long)]
    pub out_eigen: PathBuf,
    #[arg(long)]
    pub out_scores: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Assembled design CSV (y, x1.., z1..).
    #[arg(long, conflicts_with = "curves")]
    pub data: Option<PathBuf>,
    /// Curve CSV; requires --responses and --m.
    #[arg(long, requires_all = ["responses", "m"])]
    pub curves: Option<PathBuf>,
    /// Subject table subject_id,y[,other invariant columns...].
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long, value_enum, default_value = "jmr")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub invariant_cols: Vec<String>,
    #[command(flatten)]
    pub em: EmArgs,
    /// Posterior thresholds for the threshold curve; bare flag means 0.5..0.8 by 0.05.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub thresholds: Option<Vec<f64>>,
    /// Per-subject predictions CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MspeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200_000)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_model(path: &Path) -> Result<(ModelDocument, mixreg_core::MixtureModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc = ModelDocument::from_json(&text)?;
    let model = doc.to_model()?;
    Ok((doc, model))
}

fn fit_meta(r: &FitResult, seed: u64) -> FitMeta {
    FitMeta {
        seed: seed.to_string(),
        loglik: Num(r.loglik()),
        bic: Num(r.bic),
        iterations: r.iterations(),
        converged: r.converged,
    }
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let d = read_dataset(&a.data, &a.invariant_cols, true)?.into_dataset()?;
    let cfg = a.em.config();
    let kind: ModelKind = a.kind.into();
    let result = match a.k_max {
        Some(k_max) => {
            let sel = select_k(&d, k_max, kind, &cfg)?;
            if let Some(path) = &a.bic_report {
                let rows: Vec<Vec<String>> = sel
                    .candidates
                    .iter()
                    .map(|c| match &c.result {
                        Ok(f) => vec![
                            c.k.to_string(),
                            "ok".into(),
                            f.loglik().to_string(),
                            f.bic.to_string(),
                            (c.k == sel.k_hat).to_string(),
                        ],
                        Err(e) => vec![c.k.to_string(), format!("failed: {e}"), String::new(), String::new(), "false".into()],
                    })
                    .collect();
                let header = ["k", "status", "loglik", "bic", "selected"].map(String::from);
                atomic_write(path, rows_to_csv(&header, &rows)?.as_bytes())?;
            }
            eprintln!("selected K = {} by BIC", sel.k_hat);
            sel.best().clone()
        }
        None => fit(&d, a.k.unwrap_or(2), kind, &cfg)?,
    };
    let mut doc = ModelDocument::from_model(&result.model);
    doc.fit = Some(fit_meta(&result, a.em.seed));
    if let Some(path) = &a.eigen {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let ef: EigenFile =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        doc.eigen = Some(ef.eigen);
    }
    atomic_write(&a.out, doc.to_json().as_bytes())
}

fn check_dims(model: &mixreg_core::MixtureModel, p: usize, q: usize) -> Result<()> {
    if model.p() != p || model.q() != q {
        return Err(CliError::Data(format!(
            "model expects p = {}, q = {}; data has p = {p}, q = {q}",
            model.p(),
            model.q()
        )));
    }
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let (_, model) = read_model(&a.model)?;
    let d = read_dataset(&a.data, &a.invariant_cols, false)?;
    check_dims(&model, d.x.ncols(), d.z.ncols())?;
    let mut header = vec!["row".to_string(), "yhat".to_string()];
    header.extend((1..=model.k()).map(|k| format!("post{k}")));
    let mut rows = Vec::with_capacity(d.n());
    for i in 0..d.n() {
        let pr = predict(&model, &d.x.row(i).transpose(), Some(&d.z.row(i).transpose()))?;
        let mut row = vec![(i + 1).to_string(), pr.yhat.to_string()];
        row.extend(pr.posteriors.iter().map(f64::to_string));
        rows.push(row);
    }
    atomic_write(&a.out, rows_to_csv(&header, &rows)?.as_bytes())
}

fn run_cluster(a: &PredictArgs) -> Result<()> {
    let (_, model) = read_model(&a.model)?;
    let d = read_dataset(&a.data, &a.invariant_cols, model.kind().has_regression())?;
    check_dims(&model, d.x.ncols(), d.z.ncols())?;
    let mut rows = Vec::with_capacity(d.n());
    for i in 0..d.n() {
        let y = d.y.as_ref().map_or(0.0, |y| y[i]);
        let c = assign_cluster(&model, &d.x.row(i).transpose(), y, Some(&d.z.row(i).transpose()))?;
        rows.push(vec![(i + 1).to_string(), (c + 1).to_string()]);
    }
    let header = ["row", "cluster"].map(String::from);
    atomic_write(&a.out, rows_to_csv(&header, &rows)?.as_bytes())
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let (train, _) = make_scenario(a.scenario, a.n, a.seed)?;
    atomic_write(&a.out, dataset_to_csv(&train)?.as_bytes())
}

fn run_benchmark_cmd(a: &BenchmarkArgs) -> Result<()> {
    let cfg = BenchmarkConfig {
        fit: FitConfig::default().with_restarts(a.restarts),
        ..BenchmarkConfig::default()
    };
    let tables = run_benchmark(&a.scenarios, &a.ns, a.reps, a.seed, &cfg)?;
    atomic_write(&a.out, tables_to_csv(&tables)?.as_bytes())
}

fn run_fpca(a: &FpcaArgs) -> Result<()> {
    let (curves, endpoint) = a.smooth.prepare(&a.curves)?;
    let eig = fpca(&curves, a.m)?;
    let scores = project_scores(&curves, &eig)?;
    let file = EigenFile {
        schema_version: SCHEMA_VERSION,
        derivative: a.smooth.derivative,
        order: a.smooth.order,
        eigen: EigenDoc::from_system(&eig),
    };
    let mut json = serde_json::to_string_pretty(&file).expect("eigen file serializes");
    json.push('\n');
    let mut header = vec!["subject_id".to_string()];
    header.extend((1..=a.m).map(|j| format!("x{j}")));
    if endpoint.is_some() {
        header.push("z1".into());
    }
    let rows: Vec<Vec<String>> = (0..curves.n())
        .map(|i| {
            let mut r = vec![scores.ids[i].clone()];
            r.extend(scores.scores.row(i).iter().map(f64::to_string));
            if let Some(e) = &endpoint {
                r.push(e.values[i].to_string());
            }
            r
        })
        .collect();
    atomic_write(&a.out_eigen, json.as_bytes())?;
    atomic_write(&a.out_scores, rows_to_csv(&header, &rows)?.as_bytes())
}

fn cv_input(a: &CvArgs) -> Result<(CvInput, Option<Vec<String>>)> {
    if let Some(path) = &a.data {
        let d = read_dataset(path, &a.invariant_cols, true)?.into_dataset()?;
        return Ok((CvInput::Design(d), None));
    }
    let (Some(curves_path), Some(resp_path), Some(m)) = (&a.curves, &a.responses, a.m) else {
        return Err(CliError::Usage("cv needs --data, or --curves with --responses and --m".into()));
    };
    let (curves, endpoint) = a.smooth.prepare(curves_path)?;
    let table = read_subject_table(resp_path)?;
    let y = table
        .column("y")
        .ok_or_else(|| CliError::Data(format!("{}: missing column \"y\"", resp_path.display())))?;
    let y = SubjectValues::new(table.ids.clone(), y.to_vec())?;
    let invariants = table
        .columns
        .iter()
        .filter(|(n, _)| n != "y")
        .map(|(_, v)| SubjectValues::new(table.ids.clone(), v.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ids = curves.ids.clone();
    Ok((
        CvInput::Functional(FunctionalInputs {
            curves,
            m,
            endpoint,
            invariants,
            y,
        }),
        Some(ids),
    ))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_cv(a: &CvArgs) -> Result<()> {
    let (input, ids) = cv_input(a)?;
    let method: Method = a.method.into();
    let res = loocv(&input, method, a.k, &a.em.config())?;
    let failed = res.failures.len().to_string();
    let mut rows = vec![vec![
        "all".to_string(),
        String::new(),
        opt(res.cv),
        res.successes().to_string(),
        failed.clone(),
    ]];
    if let Some(ts) = &a.thresholds {
        let ts = if ts.is_empty() { default_thresholds() } else { ts.clone() };
        for p in cv_threshold_curve(&res, &ts)? {
            rows.push(vec![
                "threshold".into(),
                p.threshold.to_string(),
                opt(p.cv),
                p.retained.to_string(),
                failed.clone(),
            ]);
        }
    }
    for (i, e) in &res.failures {
        eprintln!("fold {} failed: {e}", i + 1);
    }
    let header = ["scope", "threshold", "cv", "retained", "failed_folds"].map(String::from);
    if let Some(path) = &a.predictions {
        atomic_write(path, loocv_to_csv(&res, ids.as_deref())?.as_bytes())?;
    }
    atomic_write(&a.out, rows_to_csv(&header, &rows)?.as_bytes())
}

fn run_mspe(a: &MspeArgs) -> Result<()> {
    let (_, model) = read_model(&a.model)?;
    if model.kind() != ModelKind::Jmr {
        return Err(CliError::Usage("mspe needs a JMR model (covariate laws are required)".into()));
    }
    let report = mspe_report(&model, None, a.mc_n, a.seed)?;
    let mut json = serde_json::to_string_pretty(&MspeDoc::from_report(&report, a.seed)).expect("report serializes");
    json.push('\n');
    atomic_write(&a.out, json.as_bytes())
}

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Cluster(a) => run_cluster(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Benchmark(a) => run_benchmark_cmd(a),
        Command::Fpca(a) => run_fpca(a),
        Command::Cv(a) => run_cv(a),
        Command::Mspe(a) => run_mspe(a),
    }
}
