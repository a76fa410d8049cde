//! Statistical parity of predictions across groups.

use std::collections::BTreeMap;

use prospect_core::linalg::dot;
use prospect_core::{Dataset, Task};

use crate::error::{CliError, Result};

/// Largest pairwise disparity of the prediction distributions across groups,
/// in `[0, 1]`.
///
/// - Binary: predictions are hard labels; the gap is the largest difference
///   in positive rate (`prediction > 0.5`).
/// - Multiclass: the largest difference in any single class's rate.
/// - Regression: the largest Kolmogorov-Smirnov distance between the
///   groups' empirical CDFs.
pub fn statistical_parity_gap(predictions: &[f64], groups: &[String], task: Task) -> Result<f64> {
    if predictions.len() != groups.len() {
        return Err(CliError::Data(format!(
            "{} predictions for {} group labels",
            predictions.len(),
            groups.len()
        )));
    }
    let mut by_group: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(groups) {
        by_group.entry(g.as_str()).or_default().push(*p);
    }
    if by_group.len() < 2 {
        return Err(CliError::Data("statistical parity needs at least two groups".into()));
    }
    let members: Vec<Vec<f64>> = by_group.into_values().collect();
    let mut gap = 0.0f64;
    match task {
        Task::Binary => {
            let rates: Vec<f64> = members.iter().map(|m| rate(m, |p| p > 0.5)).collect();
            gap = spread(&rates);
        }
        Task::Multiclass => {
            let mut classes: Vec<f64> = predictions.to_vec();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            for c in classes {
                let rates: Vec<f64> = members.iter().map(|m| rate(m, |p| p == c)).collect();
                gap = gap.max(spread(&rates));
            }
        }
        Task::Regression => {
            let mut sorted = members;
            for m in &mut sorted {
                m.sort_by(f64::total_cmp);
            }
            for a in 0..sorted.len() {
                for b in a + 1..sorted.len() {
                    gap = gap.max(ks_distance(&sorted[a], &sorted[b]));
                }
            }
        }
    }
    Ok(gap)
}

fn rate(values: &[f64], hit: impl Fn(f64) -> bool) -> f64 {
    values.iter().filter(|&&v| hit(v)).count() as f64 / values.len() as f64
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `sup_t |F_a(t) - F_b(t)|` for sorted samples; the supremum is attained at
/// a sample point, so a merge over both samples suffices.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Model predictions on `dataset`: the linear score for regression, a 0/1
/// label for binary (score > 0) and the argmax class for multiclass.
pub fn predict(dataset: &Dataset, w: &[f64]) -> Vec<f64> {
    let x = dataset.features();
    let d = dataset.dim();
    (0..dataset.len())
        .map(|i| {
            let row = x.row(i);
            match dataset.task() {
                Task::Regression => dot(row, w),
                Task::Binary => f64::from(dot(row, w) > 0.0),
                Task::Multiclass => {
                    let scores = w.chunks(d).map(|wc| dot(row, wc));
                    let (best, _) = scores
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (c, s)| if s > acc.1 { (c, s) } else { acc });
                    best as f64
                }
            }
        })
        .collect()
}
