//! Simulation scenarios, replicated method comparisons and
//! leave-one-out cross validation for mixture regression.

pub mod benchmark;
pub mod cv;
pub mod error;
pub mod metrics;
pub mod scenario;

pub use benchmark::{
    aggregate, align_to_truth, evaluate_replicate, parameter_errors, run_benchmark, tables_to_csv, BenchmarkConfig,
    BenchmarkTable, Method, MethodRecord, MethodSummary, ReplicateRecord,
};
pub use cv::{
    cv_threshold_curve, default_thresholds, loocv, loocv_to_csv, threshold_curve_to_csv, CvInput, FunctionalInputs,
    LoocvResult, ThresholdPoint,
};
pub use error::{HarnessError, Result};
pub use metrics::{misclassification_count, misclassification_rate};
pub use scenario::{fixture_version, make_scenario, Scenario};
