//! Label-permutation-invariant clustering error.

use itertools::Itertools;

use crate::error::{HarnessError, Result};

fn check(assigned: &[usize], truth: &[usize], k: usize) -> Result<()> {
    if assigned.len() != truth.len() {
        return Err(HarnessError::LengthMismatch(format!(
            "{} assigned labels, {} true labels",
            assigned.len(),
            truth.len()
        )));
    }
    if k == 0 {
        return Err(HarnessError::InvalidArgument("k must be positive".into()));
    }
    for labels in [assigned, truth] {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(HarnessError::LabelOutOfRange { index, label, k });
        }
    }
    Ok(())
}

/// Fewest mismatches over all relabelings of `assigned`.
pub fn misclassification_count(assigned: &[usize], truth: &[usize], k: usize) -> Result<usize> {
    check(assigned, truth, k)?;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&a, &t) in assigned.iter().zip(truth) {
        confusion[a][t] += 1;
    }
    let best_match = (0..k)
        .permutations(k)
        .map(|perm| perm.iter().enumerate().map(|(a, &t)| confusion[a][t]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(assigned.len() - best_match)
}

/// Mismatch fraction minimized over all K! label permutations.
pub fn misclassification_rate(assigned: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if assigned.is_empty() && truth.is_empty() {
        return Ok(0.0);
    }
    Ok(misclassification_count(assigned, truth, k)? as f64 / assigned.len() as f64)
}
