// SPDX-License-Identifier: MIT OR Apache-2.0

//! Collapsed marginal likelihood of a segment class and the joint
//! log-posterior of a segmentation.
//!
//! For one class with stacked responses `y` (length `d_v`) and design matrix
//! `G` (`d_v × D`), the regression coefficients (prior `N(λ_φ, δσ²I)`) and
//! the noise variance (prior `InvGamma(ν/2, γ/2)`) are integrated out in
//! closed form. With `A = GᵀG + δ⁻¹I`, `ỹ = y − Gλ_φ`, and
//! `quad = ỹᵀỹ − (Gᵀỹ)ᵀ A⁻¹ (Gᵀỹ)`:
//!
//! ```text
//! log m(y) = −(d_v/2)·ln 2π − ½·ln|I + δGGᵀ|
//!            + (ν/2)·ln(γ/2) − lnΓ(ν/2)
//!            + lnΓ((d_v+ν)/2) − ((d_v+ν)/2)·ln((γ+quad)/2)
//! ```
//!
//! where `ln|I + δGGᵀ| = D·ln δ + ln|A|` by the determinant identity, so the
//! computation stays in the coefficient dimension `D`.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::dist::LOG_2PI;
use crate::model::{concat_class_data, ClassAssignment, Hyperparameters, Segmentation, TimeSeries};
use crate::{Error, Result};

/// Sufficient quantities of the collapsed regression for one class.
#[derive(Debug, Clone, Copy)]
pub struct CollapsedQuad {
    /// Number of stacked response rows `d_v`.
    pub rows: usize,
    /// Residual quadratic form `ỹᵀỹ − (Gᵀỹ)ᵀ A⁻¹ (Gᵀỹ)`, never negative.
    pub quad: f64,
    /// `ln|I + δGGᵀ|`, the log volume ratio of the coefficient prior.
    pub log_det_ratio: f64,
}

/// Computes the collapsed residual quadratic and log-determinant for one
/// class's stacked data. Accepts `rows = 0` (both outputs zero).
pub fn collapsed_quad(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &Hyperparameters,
) -> Result<CollapsedQuad> {
    let d = h.d_model;
    debug_assert_eq!(g.ncols(), d);
    debug_assert_eq!(g.nrows(), y.len());
    let rows = y.len();

    let mut a = g.transpose() * g;
    for i in 0..d {
        a[(i, i)] += 1.0 / h.delta;
    }
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        context: "collapsed marginal: ridge gram matrix",
        matrix: a,
    })?;
    let log_det_ratio = d as f64 * h.delta.ln() + chol.ln_determinant();

    let ytilde = y - g * &h.lambda_phi;
    let gty = g.transpose() * &ytilde;
    let quad_raw = ytilde.dot(&ytilde) - gty.dot(&chol.solve(&gty));
    debug_assert!(
        quad_raw > -1e-6 * (1.0 + ytilde.dot(&ytilde)),
        "collapsed quadratic went negative: {quad_raw}"
    );
    Ok(CollapsedQuad {
        rows,
        quad: quad_raw.max(0.0),
        log_det_ratio,
    })
}

/// Log marginal likelihood of one class's stacked data with coefficients and
/// noise variance integrated out. Empty data yields exactly 0.
pub fn log_marginal_class(y: &DVector<f64>, g: &DMatrix<f64>, h: &Hyperparameters) -> Result<f64> {
    let cq = collapsed_quad(y, g, h)?;
    let d_v = cq.rows as f64;
    if cq.rows == 0 {
        return Ok(0.0);
    }
    Ok(
        -0.5 * d_v * LOG_2PI - 0.5 * cq.log_det_ratio + 0.5 * h.nu * (0.5 * h.gamma).ln()
            - ln_gamma(0.5 * h.nu)
            + ln_gamma(0.5 * (d_v + h.nu))
            - 0.5 * (d_v + h.nu) * (0.5 * (h.gamma + cq.quad)).ln(),
    )
}

/// Log prior of a segmentation with `k` interior change points in a series
/// of length `n`: the Beta-function weight `ln B(k+1, n−k)`, which sums to a
/// constant over all placements at each `k` and so penalizes model size.
pub fn log_prior_tau(k: usize, n: usize) -> f64 {
    debug_assert!(k < n);
    ln_gamma((k + 1) as f64) + ln_gamma((n - k) as f64) - ln_gamma((n + 1) as f64)
}

/// Joint collapsed log-posterior (up to the normalizing constant) of a
/// segmentation and its class labels: the segmentation prior plus one
/// collapsed marginal per class over that class's stacked data.
pub fn log_posterior_tau_k(
    x: &TimeSeries,
    seg: &Segmentation,
    c: &ClassAssignment,
    h: &Hyperparameters,
) -> Result<f64> {
    debug_assert_eq!(c.num_segments(), seg.num_segments());
    let mut lp = log_prior_tau(seg.k(), seg.n());
    for v in 0..c.num_classes() {
        let (y, g) = concat_class_data(x, seg, c, v, h.d_model);
        lp += log_marginal_class(&y, &g, h)?;
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn hyper_d1() -> Hyperparameters {
        let mut h = Hyperparameters::standard(1, 2.0);
        h.delta = 1.0;
        h.nu = 2.0;
        h
    }

    #[test]
    fn hand_value_intercept_only() {
        // y = [1, 1], G = [[1], [1]], δ = 1, λ = 0, ν = 2, γ = 2:
        // A = 3, quad = 2 − 4/3 = 2/3, and the closed form collapses to
        // −ln 2π − ½ ln 3 − 2 ln(4/3).
        let h = hyper_d1();
        let y = DVector::from_column_slice(&[1.0, 1.0]);
        let g = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let cq = collapsed_quad(&y, &g, &h).unwrap();
        assert_relative_eq!(cq.quad, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(cq.log_det_ratio, 3.0f64.ln(), max_relative = 1e-12);
        let lm = log_marginal_class(&y, &g, &h).unwrap();
        assert_relative_eq!(lm, -2.962547355646962, epsilon = 1e-12);
    }

    #[test]
    fn empty_class_has_zero_marginal() {
        let h = Hyperparameters::standard(2, 1.5);
        let y = DVector::zeros(0);
        let g = DMatrix::zeros(0, 2);
        assert_eq!(log_marginal_class(&y, &g, &h).unwrap(), 0.0);
    }

    /// Independent route: marginalize in the observation dimension.
    /// y | σ² ~ N(Gλ, σ²(I + δGGᵀ)), then integrate the inverse-gamma,
    /// giving the same value through an N-dimensional determinant and solve.
    fn log_marginal_observation_space(
        y: &DVector<f64>,
        g: &DMatrix<f64>,
        h: &Hyperparameters,
    ) -> f64 {
        let n = y.len();
        let cov = DMatrix::identity(n, n) + h.delta * g * g.transpose();
        let chol = cov.cholesky().unwrap();
        let log_det = chol.ln_determinant();
        let ytilde = y - g * &h.lambda_phi;
        let quad = ytilde.dot(&chol.solve(&ytilde));
        -0.5 * n as f64 * LOG_2PI - 0.5 * log_det + 0.5 * h.nu * (0.5 * h.gamma).ln()
            - ln_gamma(0.5 * h.nu)
            + ln_gamma(0.5 * (n as f64 + h.nu))
            - 0.5 * (n as f64 + h.nu) * (0.5 * (h.gamma + quad)).ln()
    }

    #[test]
    fn coefficient_and_observation_space_routes_agree() {
        let mut rng = crate::rng::RngStream::new(42);
        for trial in 0..50 {
            let d = 1 + trial % 4;
            let rows = d + 1 + trial % 7;
            let g = DMatrix::from_fn(rows, d, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(rows, |_, _| rng.random_range(-3.0..3.0));
            let mut h = Hyperparameters::standard(d, rng.random_range(0.5..4.0));
            h.delta = rng.random_range(0.1..20.0);
            h.nu = rng.random_range(0.5..6.0);
            h.lambda_phi = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let lhs = log_marginal_class(&y, &g, &h).unwrap();
            let rhs = log_marginal_observation_space(&y, &g, &h);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn segmentation_prior_frozen_values() {
        assert_relative_eq!(log_prior_tau(0, 7), -(7.0f64.ln()), epsilon = 1e-12);
        assert_relative_eq!(log_prior_tau(1, 5), -(20.0f64.ln()), epsilon = 1e-12);
        // k = n−1 is the extreme allowed argument: ln B(n, 1) = −ln n.
        assert_relative_eq!(log_prior_tau(4, 5), -(5.0f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn joint_posterior_composes_per_class_marginals() {
        let x = TimeSeries::new(vec![0.3, 1.4, -0.2, 0.9, 1.1, -0.5, 0.2, 1.8]).unwrap();
        let h = Hyperparameters::standard(2, 1.0);
        let seg = Segmentation::new(8, vec![4]).unwrap();

        // Distinct labels: one marginal per segment.
        let distinct = ClassAssignment::all_distinct(2);
        let lp_distinct = log_posterior_tau_k(&x, &seg, &distinct, &h).unwrap();
        let mut by_hand = log_prior_tau(1, 8);
        for i in 0..2 {
            let (y, g) = crate::model::segment_data(&x, &seg, i, 2);
            by_hand += log_marginal_class(&y, &g, &h).unwrap();
        }
        assert_relative_eq!(lp_distinct, by_hand, epsilon = 1e-12);

        // Shared label: stacked data, a genuinely different value.
        let shared = ClassAssignment::new(vec![0, 0]).unwrap();
        let lp_shared = log_posterior_tau_k(&x, &seg, &shared, &h).unwrap();
        assert!(lp_shared.is_finite());
        assert!((lp_shared - lp_distinct).abs() > 1e-6);
    }

    #[test]
    fn no_change_points_matches_single_segment_marginal() {
        let x = TimeSeries::new(vec![1.0, 2.0, 1.5, 2.5, 1.8, 2.2]).unwrap();
        let h = Hyperparameters::standard(2, 1.0);
        let seg = Segmentation::new(6, vec![]).unwrap();
        let c = ClassAssignment::all_distinct(1);
        let (y, g) = crate::model::segment_data(&x, &seg, 0, 2);
        let expect = log_prior_tau(0, 6) + log_marginal_class(&y, &g, &h).unwrap();
        let got = log_posterior_tau_k(&x, &seg, &c, &h).unwrap();
        assert_relative_eq!(got, expect, epsilon = 1e-12);
    }
}
