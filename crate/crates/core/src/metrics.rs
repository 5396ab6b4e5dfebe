// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation metrics for estimated change point sets.

use serde::Serialize;

use crate::error::{Error, Result};

/// `| |est| - |truth| |`.
pub fn count_error(est: &[usize], truth: &[usize]) -> usize {
    est.len().abs_diff(truth.len())
}

/// One-sided Hausdorff distance `d(C' | C) = max_{c in C} min_{c' in C'} |c' - c|`,
/// `+inf` when either set is empty.
pub fn hausdorff_one_sided(c_prime: &[usize], c: &[usize]) -> f64 {
    if c_prime.is_empty() || c.is_empty() {
        return f64::INFINITY;
    }
    c.iter()
        .map(|&x| c_prime.iter().map(|&y| x.abs_diff(y)).min().expect("nonempty"))
        .max()
        .expect("nonempty") as f64
}

/// Partition of `(0, T]` into consecutive intervals `(c_i, c_{i+1}]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    boundaries: Vec<usize>,
}

impl Partition {
    /// Partition induced by change points inside `(0, T)`; input order and
    /// duplicates are ignored.
    pub fn from_change_points(change_points: &[usize], horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::arg("partition needs T >= 1"));
        }
        let mut cps = change_points.to_vec();
        cps.sort_unstable();
        cps.dedup();
        if let Some(&c) = cps.iter().find(|&&c| c == 0 || c >= horizon) {
            return Err(Error::arg(format!("change point {c} outside (0, {horizon})")));
        }
        let mut boundaries = Vec::with_capacity(cps.len() + 2);
        boundaries.push(0);
        boundaries.extend(cps);
        boundaries.push(horizon);
        Ok(Self { boundaries })
    }

    /// Partition from explicit boundaries `0 = c_0 < ... < c_{K+1} = T`.
    pub fn from_boundaries(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0 || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("boundaries must start at 0 and increase strictly"));
        }
        Ok(Self { boundaries })
    }

    pub fn horizon(&self) -> usize {
        *self.boundaries.last().expect("at least two boundaries")
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn intervals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.boundaries.windows(2).map(|w| (w[0], w[1]))
    }
}

fn jaccard((a0, a1): (usize, usize), (b0, b1): (usize, usize)) -> f64 {
    let inter = a1.min(b1).saturating_sub(a0.max(b0));
    let union = (a1 - a0) + (b1 - b0) - inter;
    inter as f64 / union as f64
}

/// Length-weighted best Jaccard agreement `C(G, G')` of `est` with `truth`.
pub fn coverage(truth: &Partition, est: &Partition) -> Result<f64> {
    if truth.horizon() != est.horizon() {
        return Err(Error::arg(format!(
            "partitions cover different horizons ({} vs {})",
            truth.horizon(),
            est.horizon()
        )));
    }
    let total: f64 = truth
        .intervals()
        .map(|a| {
            let best = est.intervals().map(|b| jaccard(a, b)).fold(0.0, f64::max);
            (a.1 - a.0) as f64 * best
        })
        .sum();
    Ok(total / truth.horizon() as f64)
}

/// All metrics for one estimate, as reported per benchmark trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub k_hat: usize,
    pub k_true: usize,
    pub count_error: usize,
    /// `d(C_hat | C)`.
    pub hausdorff_est_given_truth: f64,
    /// `d(C | C_hat)`.
    pub hausdorff_truth_given_est: f64,
    pub coverage: f64,
}

pub fn evaluate(est: &[usize], truth: &[usize], horizon: usize) -> Result<MetricReport> {
    let cov = coverage(
        &Partition::from_change_points(truth, horizon)?,
        &Partition::from_change_points(est, horizon)?,
    )?;
    Ok(MetricReport {
        k_hat: est.len(),
        k_true: truth.len(),
        count_error: count_error(est, truth),
        hausdorff_est_given_truth: hausdorff_one_sided(est, truth),
        hausdorff_truth_given_est: hausdorff_one_sided(truth, est),
        coverage: cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_examples() {
        assert_eq!(count_error(&[70, 140], &[70, 140]), 0);
        assert_eq!(count_error(&[], &[70, 140]), 2);
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_one_sided(&[48, 105], &[50, 100]), 5.0);
        assert_eq!(hausdorff_one_sided(&[3, 9], &[3, 9]), 0.0);
        assert!(hausdorff_one_sided(&[], &[1]).is_infinite());
        assert!(hausdorff_one_sided(&[1], &[]).is_infinite());
    }

    #[test]
    fn coverage_examples() {
        let truth = Partition::from_change_points(&[5], 10).unwrap();
        let est = Partition::from_change_points(&[], 10).unwrap();
        assert!((coverage(&truth, &est).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(coverage(&truth, &truth).unwrap(), 1.0);
        let other = Partition::from_change_points(&[5], 11).unwrap();
        assert!(coverage(&truth, &other).is_err());
    }

    #[test]
    fn disjoint_jaccard_is_zero() {
        assert_eq!(jaccard((0, 3), (5, 9)), 0.0);
        assert_eq!(jaccard((0, 4), (2, 6)), 2.0 / 6.0);
    }
}
