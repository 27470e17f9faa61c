// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic piecewise autoregressive series with repeated regimes.
//!
//! Generation matches the likelihood's design convention exactly: every
//! segment restarts its lag window, so a sample near a segment start sees
//! zero in place of lags that would reach across the boundary, and the very
//! first sample of the series is intercept plus noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::TimeSeries;
use crate::{Error, Result};

/// One regime: regression coefficients (intercept first, then lag
/// coefficients) and observation noise variance.
#[derive(Debug, Clone)]
pub struct RegimeClass {
    phi: DVector<f64>,
    noise_var: f64,
}

impl RegimeClass {
    /// Validates finiteness, positive noise variance, and stationarity of
    /// the lag polynomial (all companion matrix eigenvalues inside the unit
    /// circle).
    pub fn new(phi: Vec<f64>, noise_var: f64) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::invalid_input("regime: empty coefficient vector"));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("regime: non-finite coefficient"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid_input(
                "regime: noise variance must be positive",
            ));
        }
        let p = phi.len() - 1;
        if p > 0 {
            let mut companion = DMatrix::zeros(p, p);
            for (j, &a) in phi[1..].iter().enumerate() {
                companion[(0, j)] = a;
            }
            for i in 1..p {
                companion[(i, i - 1)] = 1.0;
            }
            let spectral_radius = companion
                .complex_eigenvalues()
                .iter()
                .map(|e| e.norm())
                .fold(0.0, f64::max);
            if spectral_radius >= 1.0 {
                return Err(Error::invalid_input(format!(
                    "regime: lag polynomial is not stationary (spectral radius {spectral_radius})"
                )));
            }
        }
        Ok(Self {
            phi: DVector::from_vec(phi),
            noise_var,
        })
    }

    /// Number of lag coefficients.
    pub fn ar_order(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// A generated series together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSeries {
    pub series: TimeSeries,
    /// Change points (1-based boundary samples).
    pub tau: Vec<usize>,
    /// Class label per segment.
    pub segment_labels: Vec<usize>,
    /// Class label per sample.
    pub per_time_labels: Vec<usize>,
}

/// Generates a series of `lengths[i]` samples per segment, segment `i`
/// drawn from `classes[segment_labels[i]]`.
pub fn generate<R: Rng + ?Sized>(
    classes: &[RegimeClass],
    segment_labels: &[usize],
    lengths: &[usize],
    rng: &mut R,
) -> Result<SyntheticSeries> {
    if segment_labels.is_empty() || segment_labels.len() != lengths.len() {
        return Err(Error::invalid_input(
            "generate: segment_labels and lengths must be non-empty and equal length",
        ));
    }
    if let Some(&bad) = segment_labels.iter().find(|&&l| l >= classes.len()) {
        return Err(Error::invalid_input(format!(
            "generate: label {bad} out of range for {} classes",
            classes.len()
        )));
    }
    if lengths.iter().any(|&len| len == 0) {
        return Err(Error::invalid_input("generate: zero-length segment"));
    }
    let n: usize = lengths.iter().sum();
    let mut samples = Vec::with_capacity(n);
    let mut per_time_labels = Vec::with_capacity(n);
    let mut tau = Vec::new();
    for (i, (&label, &len)) in segment_labels.iter().zip(lengths).enumerate() {
        let class = &classes[label];
        let start = samples.len(); // 0-based index of the segment's first sample
        let sd = class.noise_var.sqrt();
        for j in 0..len {
            let mut mean = class.phi[0];
            for r in 1..=class.ar_order() {
                if j >= r {
                    mean += class.phi[r] * samples[start + j - r];
                }
            }
            let eps: f64 = rng.sample(StandardNormal);
            samples.push(mean + sd * eps);
            per_time_labels.push(label);
        }
        if i + 1 < lengths.len() {
            tau.push(samples.len());
        }
    }
    Ok(SyntheticSeries {
        series: TimeSeries::new(samples)?,
        tau,
        segment_labels: segment_labels.to_vec(),
        per_time_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn rejects_nonstationary_and_degenerate_regimes() {
        assert!(RegimeClass::new(vec![0.0, 1.01], 1.0).is_err());
        assert!(RegimeClass::new(vec![0.0, 0.6, 0.5], 1.0).is_err()); // roots straddle the circle
        assert!(RegimeClass::new(vec![0.0, 0.99], 1.0).is_ok());
        assert!(RegimeClass::new(vec![0.0, 0.5, 0.3], 1.0).is_ok());
        assert!(RegimeClass::new(vec![0.0], 0.0).is_err());
        assert!(RegimeClass::new(vec![], 1.0).is_err());
        assert!(RegimeClass::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn boundaries_and_labels_line_up() {
        let classes = [
            RegimeClass::new(vec![0.0, 0.5], 1.0).unwrap(),
            RegimeClass::new(vec![1.0, -0.3], 0.5).unwrap(),
        ];
        let mut rng = RngStream::new(5);
        let s = generate(&classes, &[0, 1, 0], &[3, 4, 5], &mut rng).unwrap();
        assert_eq!(s.series.len(), 12);
        assert_eq!(s.tau, vec![3, 7]);
        assert_eq!(s.segment_labels, vec![0, 1, 0]);
        assert_eq!(s.per_time_labels, vec![0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn lag_window_restarts_at_each_segment() {
        // First regime settles near intercept/(1-a) = 50; the second has
        // intercept 0. With a restarting window its first sample must be
        // near zero rather than carrying 0.9 * 50 across the boundary.
        let classes = [
            RegimeClass::new(vec![5.0, 0.9], 1e-8).unwrap(),
            RegimeClass::new(vec![0.0, 0.9], 1e-8).unwrap(),
        ];
        let mut rng = RngStream::new(11);
        let s = generate(&classes, &[0, 1], &[50, 10], &mut rng).unwrap();
        assert!((s.series.x(50) - 50.0).abs() < 1.0);
        assert!(s.series.x(51).abs() < 0.01);
        // And the very first sample is intercept plus (tiny) noise.
        assert!((s.series.x(1) - 5.0).abs() < 0.01);
    }

    #[test]
    fn lag_one_autocorrelation_matches_coefficient() {
        let classes = [RegimeClass::new(vec![0.0, 0.9], 1.0).unwrap()];
        let mut rng = RngStream::new(42);
        let s = generate(&classes, &[0], &[20000], &mut rng).unwrap();
        let xs = s.series.samples();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let acf1 = cov / var;
        assert!((acf1 - 0.9).abs() < 0.05, "acf1 = {acf1}");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let classes = [RegimeClass::new(vec![0.0, 0.5], 1.0).unwrap()];
        let a = generate(&classes, &[0], &[100], &mut RngStream::new(3)).unwrap();
        let b = generate(&classes, &[0], &[100], &mut RngStream::new(3)).unwrap();
        assert_eq!(a.series.samples(), b.series.samples());
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        let classes = [RegimeClass::new(vec![0.0], 1.0).unwrap()];
        let mut rng = RngStream::new(1);
        assert!(generate(&classes, &[], &[], &mut rng).is_err());
        assert!(generate(&classes, &[0], &[3, 4], &mut rng).is_err());
        assert!(generate(&classes, &[1], &[3], &mut rng).is_err());
        assert!(generate(&classes, &[0], &[0], &mut rng).is_err());
    }
}
