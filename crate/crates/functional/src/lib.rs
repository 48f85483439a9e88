//! Functional covariates: B-spline smoothing of discretely observed curves,
//! analytic derivatives, dense-grid FPCA, score projection and assembly of
//! score designs for mixture regression.

pub mod bspline;
pub mod design;
pub mod error;
pub mod fpca;
pub mod smooth;

pub use bspline::BSplineBasis;
pub use design::{assemble_design, ScoreDesign, SubjectValues};
pub use error::{FunctionalError, Result};
pub use fpca::{fpca, project_scores, reconstruct_slope, EigenSystem};
pub use smooth::{differentiate, smooth_curves, CurveSample, Grid, KnotSpec, SmoothedCurves, SmoothingOptions};
