// SPDX-License-Identifier: MIT OR Apache-2.0

//! Core data types: time series, segmentations, class assignments, model
//! hyperparameters, and the per-segment regression layout.
//!
//! # Segment layout
//!
//! Time indices are 1-based. A segmentation with `K` interior change points
//! `τ_1 < … < τ_K` induces boundaries `b_0 = 1, b_i = τ_i, b_{K+1} = N`.
//! Segment `i` owns the responses `x_{b_i + 1} ..= x_{b_{i+1}}`, so segment
//! lengths are `b_{i+1} - b_i` and always sum to `N - 1`: the first sample
//! `x_1` is never a response. It still belongs to segment 0 as a lag source,
//! so segment 0's first regression row reads `[1, x_1, 0, …]` while every
//! later segment starts from an all-zero lag state (no sample is borrowed
//! across a change point).
//!
//! Each response row for `x_t` is `[1, x_{t-1}, …, x_{t-D+1}]` with lags that
//! would reach before the segment's lag window zeroed out; `D` counts the
//! intercept plus `D - 1` autoregressive lags.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A univariate time series; all samples finite, indexing 1-based via [`TimeSeries::x`].
#[derive(Debug, Clone)]
pub struct TimeSeries {
    samples: Vec<f64>,
}

impl TimeSeries {
    /// Wraps raw samples. Fails on empty input or non-finite values.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid_input("TimeSeries: no samples"));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_input(format!(
                "TimeSeries: non-finite sample at position {pos}"
            )));
        }
        Ok(TimeSeries { samples })
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the series is empty (never, for a constructed value).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// 1-based access: `x(1)` is the first sample.
    pub fn x(&self, t: usize) -> f64 {
        self.samples[t - 1]
    }

    /// Raw slice of samples.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Unbiased sample variance; 0 for a single sample.
    pub fn sample_variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.samples.iter().sum::<f64>() / n as f64;
        self.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

/// Interior change points of a segmentation, sorted and 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Segmentation {
    n: usize,
    tau: Vec<usize>,
}

impl Segmentation {
    /// Builds a segmentation of a length-`n` series with interior change
    /// points `tau`. Points must be strictly increasing and lie in `2..=n-1`.
    pub fn new(n: usize, tau: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid_input(format!(
                "Segmentation: series length {n} too short"
            )));
        }
        for w in tau.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid_input(format!(
                    "Segmentation: change points must be strictly increasing, got {:?}",
                    tau
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (tau.first(), tau.last()) {
            if first < 2 || last > n - 1 {
                return Err(Error::invalid_input(format!(
                    "Segmentation: change points must lie in 2..={}, got {:?}",
                    n - 1,
                    tau
                )));
            }
        }
        Ok(Segmentation { n, tau })
    }

    /// Number of interior change points `K`.
    pub fn k(&self) -> usize {
        self.tau.len()
    }

    /// Number of segments `K + 1`.
    pub fn num_segments(&self) -> usize {
        self.tau.len() + 1
    }

    /// Series length `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The interior change points.
    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    /// Boundary `b_i` for `i` in `0..=K+1`: `b_0 = 1`, `b_{K+1} = N`.
    pub fn boundary(&self, i: usize) -> usize {
        if i == 0 {
            1
        } else if i <= self.tau.len() {
            self.tau[i - 1]
        } else {
            self.n
        }
    }

    /// Response length of segment `i` (`b_{i+1} - b_i`).
    pub fn segment_len(&self, i: usize) -> usize {
        self.boundary(i + 1) - self.boundary(i)
    }

    /// Index of the segment owning time `t` (1-based, `1 <= t <= n`).
    pub fn segment_of(&self, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.n);
        // Segment i owns responses b_i+1 ..= b_{i+1}; x_1 belongs to segment 0.
        self.tau.partition_point(|&cp| cp < t)
    }

    /// Checks the length floor and the change point budget.
    pub fn validate(&self, l_min: usize, k_max: usize) -> Result<()> {
        if self.k() > k_max {
            return Err(Error::invalid_input(format!(
                "Segmentation: {} change points exceed k_max = {k_max}",
                self.k()
            )));
        }
        for i in 0..self.num_segments() {
            if self.segment_len(i) < l_min {
                return Err(Error::invalid_input(format!(
                    "Segmentation: segment {i} has length {} < l_min = {l_min}",
                    self.segment_len(i)
                )));
            }
        }
        Ok(())
    }
}

/// Class labels, one per segment; ids are compact `0..V` in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAssignment {
    labels: Vec<usize>,
}

impl ClassAssignment {
    /// Wraps labels, requiring compactness: the sequence of first
    /// occurrences must be exactly `0, 1, 2, …`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid_input("ClassAssignment: no segments"));
        }
        let mut next = 0usize;
        for &l in &labels {
            if l > next {
                return Err(Error::invalid_input(format!(
                    "ClassAssignment: labels not compact, saw {l} before {next} in {labels:?}"
                )));
            }
            if l == next {
                next += 1;
            }
        }
        Ok(ClassAssignment { labels })
    }

    /// One distinct class per segment: labels `0, 1, …, count-1`.
    pub fn all_distinct(count: usize) -> Self {
        ClassAssignment {
            labels: (0..count).collect(),
        }
    }

    /// Relabels arbitrary ids into compact first-appearance order.
    pub fn compacted(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let id = match map.iter().find(|(from, _)| *from == r) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len();
                    map.push((r, to));
                    to
                }
            };
            labels.push(id);
        }
        ClassAssignment { labels }
    }

    /// Label of segment `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// All labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of segments.
    pub fn num_segments(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct classes `V`.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Segment count per class, length `V`.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.num_classes()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Segments assigned to class `v`.
    pub fn members(&self, v: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == v)
            .collect()
    }
}

/// Per-segment coefficient vectors (dimension `d_model` each).
#[derive(Debug, Clone)]
pub struct SegmentParams {
    pub phi: Vec<DVector<f64>>,
}

/// Per-class parameters: coefficient mean, coefficient covariance, and
/// observation noise variance. One entry of each per class.
#[derive(Debug, Clone)]
pub struct ClassParams {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub noise_vars: Vec<f64>,
}

impl ClassParams {
    /// Number of classes represented.
    pub fn len(&self) -> usize {
        self.means.len()
    }

    /// True when no class is represented.
    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Removes class `v`, shifting later ids down by one.
    pub fn remove(&mut self, v: usize) {
        self.means.remove(v);
        self.covs.remove(v);
        self.noise_vars.remove(v);
    }
}

/// All model constants: regression order, prior scales, Dirichlet-process
/// concentration, move budget, and chain schedule.
#[derive(Debug, Clone)]
pub struct Hyperparameters {
    /// Regression dimension: intercept plus `d_model - 1` lags.
    pub d_model: usize,
    /// Prior coefficient scale: coefficients have prior covariance `delta · σ² I`.
    pub delta: f64,
    /// Prior coefficient mean (length `d_model`).
    pub lambda_phi: DVector<f64>,
    /// Inverse-Wishart degrees of freedom for class covariances (`> d_model - 1`).
    pub beta: f64,
    /// Inverse-Wishart scale direction; the prior scale matrix is `beta · omega`.
    pub omega: DMatrix<f64>,
    /// Noise-variance prior shape parameter (inverse-gamma shape `nu / 2`).
    pub nu: f64,
    /// Noise-variance prior rate parameter (inverse-gamma rate `gamma / 2`).
    pub gamma: f64,
    /// Dirichlet-process concentration.
    pub alpha: f64,
    /// Maximum number of interior change points.
    pub k_max: usize,
    /// Minimum segment response length.
    pub l_min: usize,
    /// Outer iterations of the chain.
    pub n_iter: usize,
    /// Nested class-parameter/label sweeps per outer iteration.
    pub nc_iter: usize,
    /// Auxiliary draws for the new-class case of the label sweep.
    pub m_aux: usize,
    /// Base RNG seed.
    pub seed: u64,
    /// Fraction of iterations discarded as burn-in (`0 <= burn_in < 1`).
    pub burn_in: f64,
    /// Keep every `thin`-th retained sample.
    pub thin: usize,
}

impl Hyperparameters {
    /// Standard weakly-informative configuration for a given regression
    /// dimension and noise-prior rate (pass the sample variance of the data
    /// for `gamma` when nothing better is known).
    pub fn standard(d_model: usize, gamma: f64) -> Self {
        Hyperparameters {
            d_model,
            delta: 10.0,
            lambda_phi: DVector::zeros(d_model),
            beta: d_model as f64 + 2.0,
            omega: DMatrix::identity(d_model, d_model),
            nu: 2.0,
            gamma,
            alpha: 1.0,
            k_max: 20,
            l_min: d_model + 1,
            n_iter: 20_000,
            nc_iter: 5,
            m_aux: 3,
            seed: 0,
            burn_in: 0.5,
            thin: 1,
        }
    }

    /// Validates every constraint the samplers rely on.
    pub fn validate(&self) -> Result<()> {
        if self.d_model < 1 {
            return Err(Error::invalid_input("hyper: d_model must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid_input("hyper: delta must be positive"));
        }
        if self.lambda_phi.len() != self.d_model {
            return Err(Error::invalid_input(format!(
                "hyper: lambda_phi has length {}, expected d_model = {}",
                self.lambda_phi.len(),
                self.d_model
            )));
        }
        if !self.lambda_phi.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_input("hyper: lambda_phi must be finite"));
        }
        if !(self.beta > self.d_model as f64 - 1.0) {
            return Err(Error::invalid_input(format!(
                "hyper: beta must exceed d_model - 1 = {}",
                self.d_model - 1
            )));
        }
        if self.omega.nrows() != self.d_model || self.omega.ncols() != self.d_model {
            return Err(Error::invalid_input(format!(
                "hyper: omega is {}x{}, expected {}x{}",
                self.omega.nrows(),
                self.omega.ncols(),
                self.d_model,
                self.d_model
            )));
        }
        if self.omega.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                context: "hyper: omega",
                matrix: self.omega.clone(),
            });
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid_input("hyper: nu must be positive"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid_input("hyper: gamma must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid_input("hyper: alpha must be positive"));
        }
        if self.k_max < 1 {
            return Err(Error::invalid_input("hyper: k_max must be at least 1"));
        }
        if self.l_min < self.d_model + 1 {
            return Err(Error::invalid_input(format!(
                "hyper: l_min must be at least d_model + 1 = {}",
                self.d_model + 1
            )));
        }
        if self.nc_iter < 1 {
            return Err(Error::invalid_input("hyper: nc_iter must be at least 1"));
        }
        if self.m_aux < 1 {
            return Err(Error::invalid_input("hyper: m_aux must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::invalid_input("hyper: burn_in must lie in [0, 1)"));
        }
        if self.thin < 1 {
            return Err(Error::invalid_input("hyper: thin must be at least 1"));
        }
        Ok(())
    }

    /// Validates a series against this configuration (enough samples for at
    /// least two feasible segments).
    pub fn validate_series(&self, x: &TimeSeries) -> Result<()> {
        let need = 2 * (self.d_model + 1);
        if x.len() < need {
            return Err(Error::invalid_input(format!(
                "series of length {} is too short for d_model {}: need at least {need}",
                x.len(),
                self.d_model
            )));
        }
        Ok(())
    }
}

/// Design matrix for one contiguous window of samples: one row per sample,
/// row `t` (1-based within the window) is `[1, w_{t-1}, …, w_{t-d+1}]` with
/// lags reaching before the window start set to zero. Never references
/// samples outside `window`.
pub fn build_design_matrix(window: &[f64], d_model: usize) -> DMatrix<f64> {
    let rows = window.len();
    DMatrix::from_fn(rows, d_model, |t, j| {
        if j == 0 {
            1.0
        } else if t >= j {
            window[t - j]
        } else {
            0.0
        }
    })
}

/// Response vector and design matrix for segment `i`.
///
/// Segment 0 uses `x_1` as a lag source only: its responses start at `x_2`.
pub fn segment_data(
    x: &TimeSeries,
    seg: &Segmentation,
    i: usize,
    d_model: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    debug_assert!(i < seg.num_segments());
    let lo = seg.boundary(i); // window starts at b_i for i = 0 (i.e. x_1), b_i + 1 otherwise
    let hi = seg.boundary(i + 1);
    let window_start = if i == 0 { 1 } else { lo + 1 };
    let window = &x.samples()[window_start - 1..hi];
    let g_full = build_design_matrix(window, d_model);
    if i == 0 {
        // Drop the row for x_1: it is not a response.
        let y = DVector::from_column_slice(&window[1..]);
        let g = g_full.rows(1, window.len() - 1).into_owned();
        (y, g)
    } else {
        (DVector::from_column_slice(window), g_full)
    }
}

/// Stacked response vector and design matrix for the given segments, in the
/// order listed. Lag zero-padding restarts at each segment boundary.
pub fn concat_segments(
    x: &TimeSeries,
    seg: &Segmentation,
    members: &[usize],
    d_model: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let total: usize = members.iter().map(|&i| seg.segment_len(i)).sum();
    let mut y = DVector::zeros(total);
    let mut g = DMatrix::zeros(total, d_model);
    let mut row = 0;
    for &i in members {
        let (yi, gi) = segment_data(x, seg, i, d_model);
        y.rows_mut(row, yi.len()).copy_from(&yi);
        g.rows_mut(row, gi.nrows()).copy_from(&gi);
        row += yi.len();
    }
    (y, g)
}

/// Stacked response vector and design matrix for every segment of class `v`,
/// in segment order.
pub fn concat_class_data(
    x: &TimeSeries,
    seg: &Segmentation,
    c: &ClassAssignment,
    v: usize,
    d_model: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    concat_segments(x, seg, &c.members(v), d_model)
}

/// Class label of the segment owning each time index `1..=n`; length `n`.
pub fn per_time_labels(seg: &Segmentation, c: &ClassAssignment, n: usize) -> Vec<usize> {
    (1..=n).map(|t| c.label(seg.segment_of(t))).collect()
}
