// SPDX-License-Identifier: MIT OR Apache-2.0

//! Elementary distributions in log domain.
//!
//! Everything the samplers need: multivariate normal, inverse-Wishart,
//! inverse-gamma, and categorical sampling from unnormalized log weights.
//! Densities return `-inf` exactly off their support; dimension or
//! positivity violations of *parameters* are reported as errors instead.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// ln(2π) to full f64 precision.
pub const LOG_2PI: f64 = 1.8378770664093453;

/// Log of sum of exponentials, shifted by the maximum for stability.
///
/// Empty input and all `-inf` inputs both return `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m; // empty, all -inf, or a +inf/nan already present
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln()
}

fn cholesky_of(matrix: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::invalid_input(format!(
            "{context}: matrix must be square, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context,
            matrix: matrix.clone(),
        })
}

/// Draws from N(mean, cov). `cov` must be symmetric positive definite.
pub fn mvn_sample<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() {
        return Err(Error::invalid_input(format!(
            "mvn_sample: mean has length {}, cov is {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cholesky_of(cov, "mvn_sample")?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample(StandardNormal));
    Ok(mean + chol.l() * z)
}

/// Log density of N(mean, cov) at `x`.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = mean.len();
    if x.len() != d || cov.nrows() != d {
        return Err(Error::invalid_input(format!(
            "mvn_logpdf: dimension mismatch (x: {}, mean: {}, cov: {}x{})",
            x.len(),
            d,
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cholesky_of(cov, "mvn_logpdf")?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    // Solve L z = (x - mean); the quadratic form is |z|^2.
    let mut z = x - mean;
    chol.l().solve_lower_triangular_mut(&mut z);
    Ok(-0.5 * (d as f64 * LOG_2PI + log_det + z.norm_squared()))
}

/// Log of the multivariate gamma function Γ_d(a).
fn ln_multigamma(d: usize, a: f64) -> f64 {
    let mut v = 0.25 * (d * (d - 1)) as f64 * std::f64::consts::PI.ln();
    for j in 0..d {
        v += ln_gamma(a - 0.5 * j as f64);
    }
    v
}

/// Draws from the inverse-Wishart IW(df, scale) via the Bartlett
/// decomposition of the Wishart on the inverted scale.
///
/// Requires `df > d - 1` and SPD `scale`; the draw itself is SPD.
pub fn inv_wishart_sample<R: Rng + ?Sized>(
    df: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if df <= d as f64 - 1.0 {
        return Err(Error::invalid_input(format!(
            "inv_wishart_sample: df must exceed d - 1 = {}, got {df}",
            d - 1
        )));
    }
    let scale_chol = cholesky_of(scale, "inv_wishart_sample scale")?;
    // X ~ IW(df, S)  <=>  X^{-1} ~ Wishart(df, S^{-1}); factor S^{-1} = L L^T.
    let inv_scale = scale_chol.inverse();
    let l = cholesky_of(&inv_scale, "inv_wishart_sample inverted scale")?.unpack();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| {
            Error::invalid_input(format!("inv_wishart_sample: chi-squared setup: {e}"))
        })?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = &l * a;
    let wishart = &la * la.transpose();
    let w_chol = cholesky_of(&wishart, "inv_wishart_sample Wishart draw")?;
    Ok(w_chol.inverse())
}

/// Log density of IW(df, scale) at `x`; `-inf` when `x` is not SPD.
pub fn inv_wishart_logpdf(x: &DMatrix<f64>, df: f64, scale: &DMatrix<f64>) -> Result<f64> {
    let d = scale.nrows();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::invalid_input(format!(
            "inv_wishart_logpdf: x is {}x{}, scale is {}x{}",
            x.nrows(),
            x.ncols(),
            d,
            d
        )));
    }
    if df <= d as f64 - 1.0 {
        return Err(Error::invalid_input(format!(
            "inv_wishart_logpdf: df must exceed d - 1 = {}, got {df}",
            d - 1
        )));
    }
    let scale_chol = cholesky_of(scale, "inv_wishart_logpdf scale")?;
    let Some(x_chol) = x.clone().cholesky() else {
        return Ok(f64::NEG_INFINITY); // off support
    };
    let log_det_scale: f64 = 2.0
        * scale_chol
            .l()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let log_det_x: f64 = 2.0 * x_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = (scale * x_chol.inverse()).trace();
    Ok(0.5 * df * log_det_scale
        - 0.5 * df * d as f64 * std::f64::consts::LN_2
        - ln_multigamma(d, 0.5 * df)
        - 0.5 * (df + d as f64 + 1.0) * log_det_x
        - 0.5 * trace)
}

/// Draws from the inverse-gamma with the given shape and rate.
///
/// Parameterization: density `rate^shape / Γ(shape) · x^{-shape-1} e^{-rate/x}`.
pub fn inv_gamma_sample<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if shape <= 0.0 || rate <= 0.0 {
        return Err(Error::invalid_input(format!(
            "inv_gamma_sample: shape and rate must be positive, got ({shape}, {rate})"
        )));
    }
    // 1/X with X ~ Gamma(shape, rate) i.e. scale 1/rate.
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::invalid_input(format!("inv_gamma_sample: {e}")))?;
    Ok(1.0 / gamma.sample(rng))
}

/// Log density of the inverse-gamma at `x`; `-inf` for `x <= 0`.
pub fn inv_gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

/// Samples an index from unnormalized log weights.
///
/// `-inf` entries have probability zero; it is an error for every entry to
/// be `-inf` (or the slice to be empty).
pub fn categorical_sample_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let m = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::NumericalDomain {
            context: "categorical_sample_log",
            message: format!("no finite weight among {} entries", log_weights.len()),
        });
    }
    let probs: Vec<f64> = log_weights.iter().map(|w| (w - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // Guard against u == total after rounding: return the last live index.
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap())
}
