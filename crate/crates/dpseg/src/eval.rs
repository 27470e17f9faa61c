// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scoring of estimated change points and class assignments against ground
//! truth.

use crate::model::ClassAssignment;

/// Precision, recall, and F1 of a change point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores estimated against true change points with a matching window:
/// pairs within `window` samples are matched greedily by distance, one to
/// one. Two empty sets score a perfect 1; an empty side against a
/// non-empty one scores 0.
pub fn cp_f1(est: &[usize], truth: &[usize], window: usize) -> F1Score {
    if est.is_empty() && truth.is_empty() {
        return F1Score {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &e) in est.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let d = e.abs_diff(t);
            if d <= window {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut est_used = vec![false; est.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut tp = 0usize;
    for (_, i, j) in pairs {
        if !est_used[i] && !truth_used[j] {
            est_used[i] = true;
            truth_used[j] = true;
            tp += 1;
        }
    }
    let precision = if est.is_empty() {
        0.0
    } else {
        tp as f64 / est.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        tp as f64 / truth.len() as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Score {
        precision,
        recall,
        f1,
    }
}

fn choose2(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two label sequences of equal length.
/// A degenerate index denominator (both partitions trivial) scores 1 when
/// the partitions coincide and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "label sequences must have equal length");
    assert!(!a.is_empty(), "label sequences must be non-empty");
    let ca = ClassAssignment::compacted(a);
    let cb = ClassAssignment::compacted(b);
    let ra = ca.num_classes();
    let rb = cb.num_classes();
    let mut table = vec![vec![0f64; rb]; ra];
    for (&la, &lb) in ca.labels().iter().zip(cb.labels()) {
        table[la][lb] += 1.0;
    }
    let sum_cells: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_rows: f64 = (0..ra).map(|i| choose2(table[i].iter().sum())).sum();
    let sum_cols: f64 = (0..rb)
        .map(|j| choose2((0..ra).map(|i| table[i][j]).sum()))
        .sum();
    let expected = sum_rows * sum_cols / choose2(a.len() as f64);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        return if ca.labels() == cb.labels() { 1.0 } else { 0.0 };
    }
    (sum_cells - expected) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn f1_empty_conventions() {
        assert_eq!(cp_f1(&[], &[], 5).f1, 1.0);
        assert_eq!(cp_f1(&[], &[10], 5).f1, 0.0);
        assert_eq!(cp_f1(&[10], &[], 5).f1, 0.0);
    }

    #[test]
    fn f1_window_and_exact_matching() {
        let s = cp_f1(&[10, 50], &[12, 48], 2);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = cp_f1(&[10, 50], &[12, 48], 1);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn f1_matching_is_one_to_one() {
        // Both estimates sit near the single true point; only one may match.
        let s = cp_f1(&[10, 11], &[10], 1);
        assert_relative_eq!(s.precision, 0.5);
        assert_relative_eq!(s.recall, 1.0);
        assert_relative_eq!(s.f1, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn f1_greedy_prefers_nearest() {
        // est 9 could match truth 10, but est 10 is closer; greedy pairing
        // leaves est 9 for truth 8.
        let s = cp_f1(&[9, 10], &[8, 10], 1);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ari_known_values() {
        assert_relative_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        // Relabeling does not matter.
        assert_relative_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // One trivial partition against an informative one: chance level.
        assert_relative_eq!(adjusted_rand_index(&[0, 0, 0, 0], &[0, 0, 1, 1]), 0.0);
        // Maximally crossed partitions go negative.
        assert_relative_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]), -0.5);
    }

    #[test]
    fn ari_degenerate_denominators() {
        // Both all-singleton: identical partitions.
        assert_eq!(adjusted_rand_index(&[0, 1, 2], &[2, 0, 1]), 1.0);
        // Both single-cluster.
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 0, 0]), 1.0);
    }
}
