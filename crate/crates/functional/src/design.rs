//! Assembly of score designs into regression datasets: scores enter the
//! mixture density, endpoint and other invariant columns enter the
//! regression only.

use mixreg_core::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::error::{FunctionalError, Result};

/// Per-subject FPCA scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDesign {
    pub ids: Vec<String>,
    /// n×M scores.
    pub scores: DMatrix<f64>,
}

/// One scalar value per subject, keyed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectValues {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl SubjectValues {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(FunctionalError::DimensionMismatch(format!(
                "{} ids for {} values",
                ids.len(),
                values.len()
            )));
        }
        Ok(Self { ids, values })
    }
}

fn check_ids(expected: &[String], found: &[String]) -> Result<()> {
    if expected.len() != found.len() {
        return Err(FunctionalError::DimensionMismatch(format!(
            "{} subjects in the score design, {} in a column",
            expected.len(),
            found.len()
        )));
    }
    match expected.iter().zip(found).position(|(a, b)| a != b) {
        Some(row) => Err(FunctionalError::IdMismatch {
            row,
            expected: expected[row].clone(),
            found: found[row].clone(),
        }),
        None => Ok(()),
    }
}

/// Builds a dataset with X = scores and Z = [endpoint, invariants...].
/// Every column must list the subjects in the score design's order.
pub fn assemble_design(
    scores: &ScoreDesign,
    endpoint: Option<&SubjectValues>,
    invariants: &[SubjectValues],
    y: &SubjectValues,
) -> Result<Dataset> {
    let n = scores.ids.len();
    if scores.scores.nrows() != n {
        return Err(FunctionalError::DimensionMismatch(format!(
            "{n} ids for {} score rows",
            scores.scores.nrows()
        )));
    }
    check_ids(&scores.ids, &y.ids)?;
    let columns: Vec<&SubjectValues> = endpoint.into_iter().chain(invariants).collect();
    for c in &columns {
        check_ids(&scores.ids, &c.ids)?;
    }
    let z = DMatrix::from_fn(n, columns.len(), |i, j| columns[j].values[i]);
    Ok(Dataset::new(
        DVector::from_column_slice(&y.values),
        scores.scores.clone(),
        Some(z),
        None,
    )?)
}
