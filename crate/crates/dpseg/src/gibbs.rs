// SPDX-License-Identifier: MIT OR Apache-2.0

//! Conjugate conditional updates for the class-level parameters, and the
//! label resampling sweep that lets segments share a class.
//!
//! Class parameters form a triple per class: a coefficient mean `φᶜ_v`, a
//! coefficient covariance `Σᶜ_v`, and a noise variance `σ²_v`. Segments
//! assigned to a class draw their own coefficient vector `φ_i` around the
//! class mean. Labels follow a Chinese-restaurant-process prior with
//! concentration `α`; the sweep over labels uses auxiliary parameter
//! triples for the new-class case so that the update is an exact Gibbs step
//! on the extended state (a singleton's current triple is retained as the
//! first auxiliary rather than redrawn — dropping it would bias the chain
//! away from singletons).
//!
//! Throughout, labels are a raw `Vec<usize>` kept dense (every id in
//! `0..params.len()` has at least one member) but not necessarily in
//! first-appearance order; canonicalize with
//! [`ClassAssignment::compacted`](crate::model::ClassAssignment::compacted)
//! before comparing partitions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{
    categorical_sample_log, inv_gamma_sample, inv_wishart_sample, mvn_logpdf, mvn_sample,
};
use crate::marginal::collapsed_quad;
use crate::model::{
    concat_segments, segment_data, ClassParams, Hyperparameters, SegmentParams, Segmentation,
    TimeSeries,
};
use crate::{Error, Result};

/// Inverts an SPD matrix through its Cholesky factor.
fn spd_inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite {
            context,
            matrix: m.clone(),
        })
}

/// Posterior mean and covariance of one segment's coefficient vector given
/// its data, its class's noise variance, and its class's coefficient law:
/// `V = (GᵀG/σ² + Σᶜ⁻¹)⁻¹`, `μ = V(GᵀY/σ² + Σᶜ⁻¹φᶜ)`.
pub fn segment_params_posterior(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    noise_var: f64,
    class_mean: &DVector<f64>,
    class_cov: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let prec_c = spd_inverse(class_cov, "segment posterior: class covariance")?;
    let a = g.transpose() * g / noise_var + &prec_c;
    let v = spd_inverse(&a, "segment posterior: precision")?;
    let mu = &v * (g.transpose() * y / noise_var + prec_c * class_mean);
    Ok((mu, v))
}

/// Draws one segment's coefficient vector from its conditional posterior.
pub fn sample_segment_params<R: Rng + ?Sized>(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    noise_var: f64,
    class_mean: &DVector<f64>,
    class_cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (mu, v) = segment_params_posterior(y, g, noise_var, class_mean, class_cov)?;
    mvn_sample(&mu, &v, rng)
}

/// Posterior mean and covariance of a class's coefficient mean given its
/// members' coefficient vectors: `Σ = (n·Σᶜ⁻¹ + (δσ²)⁻¹I)⁻¹`,
/// `μ = Σ(Σᶜ⁻¹·Σφᵢ + (δσ²)⁻¹λ_φ)`.
pub fn class_mean_posterior(
    phis: &[DVector<f64>],
    noise_var: f64,
    class_cov: &DMatrix<f64>,
    h: &Hyperparameters,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = h.d_model;
    let n_v = phis.len() as f64;
    let prec_c = spd_inverse(class_cov, "class mean posterior: class covariance")?;
    let prior_prec = 1.0 / (h.delta * noise_var);
    let mut a = n_v * &prec_c;
    for i in 0..d {
        a[(i, i)] += prior_prec;
    }
    let cov = spd_inverse(&a, "class mean posterior: precision")?;
    let mut phi_sum = DVector::zeros(d);
    for p in phis {
        phi_sum += p;
    }
    let mu = &cov * (prec_c * phi_sum + prior_prec * &h.lambda_phi);
    Ok((mu, cov))
}

/// Draws a class's coefficient mean from its conditional posterior.
pub fn sample_class_mean<R: Rng + ?Sized>(
    phis: &[DVector<f64>],
    noise_var: f64,
    class_cov: &DMatrix<f64>,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (mu, cov) = class_mean_posterior(phis, noise_var, class_cov, h)?;
    mvn_sample(&mu, &cov, rng)
}

/// Inverse-Wishart posterior of a class's coefficient covariance:
/// degrees of freedom `n + β`, scale `βΩ + Σ(φᵢ−φᶜ)(φᵢ−φᶜ)ᵀ`.
/// With no members this is the prior `IW(β, βΩ)`.
pub fn class_cov_posterior(
    phis: &[DVector<f64>],
    class_mean: &DVector<f64>,
    h: &Hyperparameters,
) -> (f64, DMatrix<f64>) {
    let mut scale = h.beta * &h.omega;
    for p in phis {
        let diff = p - class_mean;
        scale += &diff * diff.transpose();
    }
    (phis.len() as f64 + h.beta, scale)
}

/// Draws a class's coefficient covariance from its conditional posterior.
pub fn sample_class_cov<R: Rng + ?Sized>(
    phis: &[DVector<f64>],
    class_mean: &DVector<f64>,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (df, scale) = class_cov_posterior(phis, class_mean, h);
    inv_wishart_sample(df, &scale, rng)
}

/// Inverse-gamma posterior (shape, rate) of a class's noise variance given
/// its stacked data, with the class coefficient integrated out:
/// shape `(ν + d_v)/2`, rate `(γ + quad)/2` where `quad` is the collapsed
/// residual quadratic of the stacked regression.
pub fn class_noise_var_posterior(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &Hyperparameters,
) -> Result<(f64, f64)> {
    let cq = collapsed_quad(y, g, h)?;
    Ok((0.5 * (h.nu + cq.rows as f64), 0.5 * (h.gamma + cq.quad)))
}

/// Draws a class's noise variance from its conditional posterior.
pub fn sample_class_noise_var<R: Rng + ?Sized>(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = class_noise_var_posterior(y, g, h)?;
    inv_gamma_sample(shape, rate, rng)
}

/// Draws one class parameter triple `(mean, covariance, noise variance)`
/// from the base measure: `σ² ~ InvGamma(ν/2, γ/2)`, `φᶜ ~ N(λ_φ, δσ²I)`,
/// `Σᶜ ~ IW(β, βΩ)`.
pub fn sample_class_triple_from_base<R: Rng + ?Sized>(
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let noise_var = inv_gamma_sample(0.5 * h.nu, 0.5 * h.gamma, rng)?;
    let d = h.d_model;
    let prior_cov = DMatrix::identity(d, d) * (h.delta * noise_var);
    let mean = mvn_sample(&h.lambda_phi, &prior_cov, rng)?;
    let cov = inv_wishart_sample(h.beta, &(h.beta * &h.omega), rng)?;
    Ok((mean, cov, noise_var))
}

/// Prior probabilities of the label of one segment under the
/// Chinese-restaurant process, given the class sizes with that segment
/// excluded: existing class `v` has probability `n_v/(n+α)`, a new class
/// `α/(n+α)`, with `n = Σ n_v`. The new-class entry is last. The entries
/// sum to one in exact arithmetic.
pub fn crp_prior_probs(counts_excl: &[usize], alpha: f64) -> Vec<f64> {
    let n: usize = counts_excl.iter().sum();
    let denom = n as f64 + alpha;
    let mut probs: Vec<f64> = counts_excl.iter().map(|&c| c as f64 / denom).collect();
    probs.push(alpha / denom);
    probs
}

/// The same label prior under a finite symmetric mixture with `v_total`
/// components: existing class `v` has probability `(n_v + α/V)/(n+α)` and
/// the unoccupied components pool to `(V−L)·(α/V)/(n+α)` (last entry).
/// Converges to [`crp_prior_probs`] as `v_total → ∞`.
pub fn finite_mixture_prior_probs(counts_excl: &[usize], alpha: f64, v_total: usize) -> Vec<f64> {
    let l = counts_excl.len();
    assert!(v_total >= l, "finite mixture needs at least {l} components");
    let n: usize = counts_excl.iter().sum();
    let denom = n as f64 + alpha;
    let per_component = alpha / v_total as f64;
    let mut probs: Vec<f64> = counts_excl
        .iter()
        .map(|&c| (c as f64 + per_component) / denom)
        .collect();
    probs.push((v_total - l) as f64 * per_component / denom);
    probs
}

enum LabelChoice {
    Existing(usize),
    Auxiliary(usize),
}

/// One sweep of label resampling over all segments, updating `labels` and
/// `params` in place.
///
/// For each segment in order: its label is removed, `m_aux` auxiliary
/// triples represent the new-class option (a singleton's own triple is kept
/// as the first auxiliary; the rest come fresh from the base measure), and
/// the label is redrawn with log weights `ln n_v + ln N(φᵢ; φᶜ_v, Σᶜ_v)`
/// for occupied classes and `ln(α/m) + ln N(φᵢ; φᶜ_a, Σᶜ_a)` for each
/// auxiliary. Emptied classes are dropped, chosen auxiliaries become real.
pub fn resample_labels<R: Rng + ?Sized>(
    phis: &[DVector<f64>],
    labels: &mut Vec<usize>,
    params: &mut ClassParams,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<()> {
    debug_assert_eq!(phis.len(), labels.len());
    let m = h.m_aux;
    let log_alpha_per_aux = (h.alpha / m as f64).ln();
    for i in 0..labels.len() {
        let old = labels[i];
        let mut counts = vec![0usize; params.len()];
        for (j, &l) in labels.iter().enumerate() {
            if j != i {
                counts[l] += 1;
            }
        }
        let singleton = counts[old] == 0;

        let mut aux: Vec<(DVector<f64>, DMatrix<f64>, f64)> = Vec::with_capacity(m);
        if singleton {
            aux.push((
                params.means[old].clone(),
                params.covs[old].clone(),
                params.noise_vars[old],
            ));
        }
        while aux.len() < m {
            aux.push(sample_class_triple_from_base(h, rng)?);
        }

        let mut choices = Vec::with_capacity(params.len() + m);
        let mut log_weights = Vec::with_capacity(params.len() + m);
        for v in 0..params.len() {
            if counts[v] > 0 {
                choices.push(LabelChoice::Existing(v));
                log_weights.push(
                    (counts[v] as f64).ln()
                        + mvn_logpdf(&phis[i], &params.means[v], &params.covs[v])?,
                );
            }
        }
        for (a, (mean, cov, _)) in aux.iter().enumerate() {
            choices.push(LabelChoice::Auxiliary(a));
            log_weights.push(log_alpha_per_aux + mvn_logpdf(&phis[i], mean, cov)?);
        }

        match choices[categorical_sample_log(&log_weights, rng)?] {
            LabelChoice::Existing(v) => {
                labels[i] = v;
                if singleton {
                    params.remove(old);
                    for l in labels.iter_mut() {
                        if *l > old {
                            *l -= 1;
                        }
                    }
                }
            }
            LabelChoice::Auxiliary(a) => {
                let (mean, cov, noise_var) = aux.swap_remove(a);
                if singleton {
                    // The segment stays its own class; `a == 0` keeps the
                    // current triple unchanged.
                    params.means[old] = mean;
                    params.covs[old] = cov;
                    params.noise_vars[old] = noise_var;
                } else {
                    labels[i] = params.len();
                    params.means.push(mean);
                    params.covs.push(cov);
                    params.noise_vars.push(noise_var);
                }
            }
        }
    }
    Ok(())
}

/// Redraws every segment's coefficient vector from its conditional
/// posterior under the current labels and class parameters.
pub fn refresh_segment_params<R: Rng + ?Sized>(
    x: &TimeSeries,
    seg: &Segmentation,
    labels: &[usize],
    params: &ClassParams,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<SegmentParams> {
    let mut phi = Vec::with_capacity(labels.len());
    for (i, &v) in labels.iter().enumerate() {
        let (y, g) = segment_data(x, seg, i, h.d_model);
        phi.push(sample_segment_params(
            &y,
            &g,
            params.noise_vars[v],
            &params.means[v],
            &params.covs[v],
            rng,
        )?);
    }
    Ok(SegmentParams { phi })
}

/// Collects the coefficient vectors of class `v`'s members.
fn member_phis(phis: &[DVector<f64>], labels: &[usize], v: usize) -> Vec<DVector<f64>> {
    labels
        .iter()
        .zip(phis)
        .filter(|(&l, _)| l == v)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Redraws every class's coefficient mean.
pub fn sweep_class_means<R: Rng + ?Sized>(
    phis: &[DVector<f64>],
    labels: &[usize],
    params: &mut ClassParams,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<()> {
    for v in 0..params.len() {
        let members = member_phis(phis, labels, v);
        params.means[v] =
            sample_class_mean(&members, params.noise_vars[v], &params.covs[v], h, rng)?;
    }
    Ok(())
}

/// Redraws every class's coefficient covariance.
pub fn sweep_class_covs<R: Rng + ?Sized>(
    phis: &[DVector<f64>],
    labels: &[usize],
    params: &mut ClassParams,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<()> {
    for v in 0..params.len() {
        let members = member_phis(phis, labels, v);
        params.covs[v] = sample_class_cov(&members, &params.means[v], h, rng)?;
    }
    Ok(())
}

/// Redraws every class's noise variance from its stacked data.
pub fn sweep_class_noise_vars<R: Rng + ?Sized>(
    x: &TimeSeries,
    seg: &Segmentation,
    labels: &[usize],
    params: &mut ClassParams,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<()> {
    for v in 0..params.len() {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == v).collect();
        let (y, g) = concat_segments(x, seg, &members, h.d_model);
        params.noise_vars[v] = sample_class_noise_var(&y, &g, h, rng)?;
    }
    Ok(())
}
