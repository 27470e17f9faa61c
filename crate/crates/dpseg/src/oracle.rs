// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numerical reference computations used to validate the fast closed-form
//! paths and the samplers.
//!
//! * [`oracle_quadrature`] integrates one class's collapsed marginal
//!   likelihood by brute-force numerical quadrature over the coefficient
//!   vector and the noise variance. It never touches the closed-form
//!   marginal: the coefficient center comes from a QR least-squares solve of
//!   the ridge system, the integration axes from a symmetric eigen
//!   decomposition, and the value from tensor-product Gauss–Legendre sums.
//! * [`oracle_enumerate`] computes the exact posterior over every feasible
//!   segmentation of a short series by exhaustive enumeration, for comparing
//!   sampler visit frequencies against ground truth.
//!
//! Both are deliberately slow and simple; they exist so that faster code has
//! something to be checked against.

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::dist::{log_sum_exp, LOG_2PI};
use crate::marginal::log_posterior_tau_k;
use crate::model::{ClassAssignment, Hyperparameters, Segmentation, TimeSeries};
use crate::{Error, Result};

/// Outcome of the brute-force marginal-likelihood quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    /// Log of the integrated marginal likelihood.
    pub log_marginal: f64,
    /// Absolute difference between the two resolution levels; an upper
    /// estimate of the quadrature error in the log value.
    pub error_estimate: f64,
    /// True when `error_estimate` met the requested target.
    pub converged: bool,
}

/// Relative log-density threshold below the peak at which a noise-variance
/// slice is treated as massless (tail mass is then ≪ 1e-20 of the total).
const SLICE_CUTOFF_NATS: f64 = 60.0;

/// Multiplies `a * b` treating `0 * inf` as 0 (a vanished term cannot
/// resurrect mass at an extreme noise variance).
fn guarded_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// The joint density of (rotated coefficient offset, log noise variance),
/// with every noise-variance-independent quantity precomputed.
///
/// Coordinates: `u = ln σ²` and `η` with `φ = λ_φ + √σ²·(μ̃/√σ² + Qη)`,
/// where `μ̃` solves the ridge least-squares system `(GᵀG + δ⁻¹I)μ̃ = Gᵀỹ`
/// (via QR, not Cholesky) and `Q` diagonalizes `GᵀG + δ⁻¹I`. In these
/// coordinates the conditional over `η` is the same axis-aligned Gaussian at
/// every `u`, so one fixed tensor grid covers all slices.
struct Integrand {
    d: usize,
    n_rows: f64,
    delta: f64,
    nu: f64,
    gamma: f64,
    /// `|ỹ − Gμ̃|²`.
    e0: f64,
    /// `(GQ)ᵀ(ỹ − Gμ̃)`.
    w: DVector<f64>,
    /// `Qᵀ(GᵀG)Q`.
    h_mat: DMatrix<f64>,
    /// `Qᵀμ̃`.
    q_tilde: DVector<f64>,
    /// `|μ̃|²`.
    mu_norm2: f64,
    /// Eigenvalues of `GᵀG + δ⁻¹I` (the per-axis precisions over `η`).
    lambda: DVector<f64>,
    /// `|ỹ|²`, used only to size the initial noise-variance box.
    rss: f64,
    /// Constant of the coefficient prior: `−(D/2)·ln(2πδ)`.
    c_psi: f64,
    /// Constant of the noise-variance prior: `(ν/2)·ln(γ/2) − lnΓ(ν/2)`.
    c_ig: f64,
}

impl Integrand {
    fn new(y: &DVector<f64>, g: &DMatrix<f64>, h: &Hyperparameters) -> Result<Self> {
        let d = h.d_model;
        let n = y.len();
        let ytilde = y - g * &h.lambda_phi;
        let rss = ytilde.dot(&ytilde);

        let mut a = g.transpose() * g;
        for i in 0..d {
            a[(i, i)] += 1.0 / h.delta;
        }
        let eig = SymmetricEigen::new(a);
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NumericalDomain {
                context: "quadrature oracle",
                message: "ridge gram matrix has a non-positive eigenvalue".into(),
            });
        }

        // Ridge least squares through the stacked system [G; δ^{-1/2} I].
        let mut m_aug = DMatrix::zeros(n + d, d);
        m_aug.rows_mut(0, n).copy_from(g);
        for i in 0..d {
            m_aug[(n + i, i)] = h.delta.powf(-0.5);
        }
        let mut rhs = DVector::zeros(n + d);
        rhs.rows_mut(0, n).copy_from(&ytilde);
        let qr = m_aug.qr();
        let qt_rhs = qr.q().transpose() * rhs;
        let mu = qr
            .r()
            .solve_upper_triangular(&qt_rhs)
            .ok_or(Error::NumericalDomain {
                context: "quadrature oracle",
                message: "ridge least-squares system is singular".into(),
            })?;

        let q_mat = eig.eigenvectors;
        let gq = g * &q_mat;
        let res = &ytilde - g * &mu;
        Ok(Integrand {
            d,
            n_rows: n as f64,
            delta: h.delta,
            nu: h.nu,
            gamma: h.gamma,
            e0: res.dot(&res),
            w: gq.transpose() * &res,
            h_mat: gq.transpose() * &gq,
            q_tilde: q_mat.transpose() * &mu,
            mu_norm2: mu.dot(&mu),
            lambda: eig.eigenvalues,
            rss,
            c_psi: -0.5 * d as f64 * (LOG_2PI + h.delta.ln()),
            c_ig: 0.5 * h.nu * (0.5 * h.gamma).ln() - ln_gamma(0.5 * h.nu),
        })
    }

    /// Log joint density at offset `eta` and log noise variance `u`, with
    /// `1/σ²` and `1/σ` supplied by the caller (they are slice constants).
    /// Includes the `du` Jacobian. Returns `-inf` where the density vanishes.
    fn log_value_with(&self, eta: &[f64], u: f64, inv_s: f64, inv_rs: f64) -> f64 {
        let mut quad_h = 0.0;
        let mut dot_w = 0.0;
        let mut dot_qt = 0.0;
        let mut norm2 = 0.0;
        for i in 0..self.d {
            dot_w += self.w[i] * eta[i];
            dot_qt += self.q_tilde[i] * eta[i];
            norm2 += eta[i] * eta[i];
            let mut row = 0.0;
            for j in 0..self.d {
                row += self.h_mat[(i, j)] * eta[j];
            }
            quad_h += eta[i] * row;
        }
        let log_lik = -0.5 * self.n_rows * (LOG_2PI + u) - 0.5 * guarded_mul(self.e0, inv_s)
            + guarded_mul(dot_w, inv_rs)
            - 0.5 * quad_h;
        let log_prior_phi = self.c_psi
            - 0.5 * (guarded_mul(self.mu_norm2, inv_s) + 2.0 * guarded_mul(dot_qt, inv_rs) + norm2)
                / self.delta;
        let log_prior_s = self.c_ig - (0.5 * self.nu + 1.0) * u - 0.5 * self.gamma * inv_s;
        let l = log_lik + log_prior_phi + log_prior_s + u;
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    }

    /// Log density along the slice center `η = 0`; proportional (with a
    /// `u`-independent constant) to the whole slice's contribution, which
    /// makes it the right probe for locating and bounding the mass in `u`.
    fn log_center_value(&self, u: f64) -> f64 {
        let zeros = vec![0.0; self.d];
        self.log_value_with(&zeros, u, (-u).exp(), (-0.5 * u).exp())
    }
}

/// Evaluates the double integral over one `u`-interval with the given
/// resolution, returning the log of the integral.
fn integrate(
    ig: &Integrand,
    u_lo: f64,
    u_hi: f64,
    q_psi: usize,
    max_seg_width: f64,
    q_u: usize,
    box_sigmas: f64,
) -> f64 {
    let gl_u = GaussLegendre::new(q_u.try_into().expect("q_u >= 1"));
    let gl_p = GaussLegendre::new(q_psi.try_into().expect("q_psi >= 1"));
    let tu: Vec<f64> = gl_u.nodes().copied().collect();
    let wu: Vec<f64> = gl_u.weights().copied().collect();
    let tp: Vec<f64> = gl_p.nodes().copied().collect();
    let wp: Vec<f64> = gl_p.weights().copied().collect();

    let d = ig.d;
    let mut axis_nodes: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut axis_wts: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let half_width = box_sigmas / ig.lambda[i].sqrt();
        axis_nodes.push(tp.iter().map(|t| t * half_width).collect());
        axis_wts.push(wp.iter().map(|w| w * half_width).collect());
    }

    let n_seg = (((u_hi - u_lo) / max_seg_width).ceil() as usize).max(1);
    let seg_width = (u_hi - u_lo) / n_seg as f64;
    let mut terms: Vec<f64> = Vec::with_capacity(n_seg * q_u);
    let mut eta = vec![0.0; d];
    let mut idx = vec![0usize; d];
    for seg in 0..n_seg {
        let a = u_lo + seg as f64 * seg_width;
        let center = a + 0.5 * seg_width;
        let half = 0.5 * seg_width;
        for (t, w) in tu.iter().zip(&wu) {
            let u = center + half * t;
            let inv_s = (-u).exp();
            let inv_rs = (-0.5 * u).exp();
            eta.iter_mut().for_each(|e| *e = 0.0);
            let l_ref = ig.log_value_with(&eta, u, inv_s, inv_rs);
            if l_ref == f64::NEG_INFINITY {
                continue;
            }
            // Tensor sum over the fixed η grid, shifted by the slice peak.
            idx.iter_mut().for_each(|i| *i = 0);
            let mut sum = 0.0;
            'grid: loop {
                let mut wprod = 1.0;
                for i in 0..d {
                    eta[i] = axis_nodes[i][idx[i]];
                    wprod *= axis_wts[i][idx[i]];
                }
                let lv = ig.log_value_with(&eta, u, inv_s, inv_rs);
                sum += wprod * (lv - l_ref).exp();
                for i in 0..d {
                    idx[i] += 1;
                    if idx[i] < q_psi {
                        continue 'grid;
                    }
                    idx[i] = 0;
                }
                break;
            }
            if sum > 0.0 {
                terms.push(l_ref + sum.ln() + (w * half).ln());
            }
        }
    }
    log_sum_exp(&terms)
}

/// Brute-force log marginal likelihood of one class's stacked data `(y, G)`
/// by tensor quadrature, with an honest error estimate from two resolution
/// levels. `target_error` is the log-scale error the caller requires for
/// `converged` to be set.
pub fn oracle_quadrature(
    y: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &Hyperparameters,
    target_error: f64,
) -> Result<QuadratureResult> {
    h.validate()?;
    if g.ncols() != h.d_model || g.nrows() != y.len() {
        return Err(Error::invalid_input(format!(
            "quadrature oracle: design matrix is {}x{}, expected {}x{}",
            g.nrows(),
            g.ncols(),
            y.len(),
            h.d_model
        )));
    }
    if y.is_empty() {
        // Both priors integrate to one: the marginal of no data is 1.
        return Ok(QuadratureResult {
            log_marginal: 0.0,
            error_estimate: 0.0,
            converged: true,
        });
    }
    let ig = Integrand::new(y, g, h)?;

    // Locate the noise-variance mass: start from a generous box and widen
    // until both endpoint slices sit far below the peak.
    let mut u_lo = (1e-4 * h.gamma).ln();
    let mut u_hi = (1e4 * h.gamma.max(ig.rss)).ln();
    let scan = |lo: f64, hi: f64| -> (f64, Vec<f64>) {
        let pts = (1024usize).max(((hi - lo) / 0.02) as usize).min(8192);
        let vals: Vec<f64> = (0..=pts)
            .map(|i| ig.log_center_value(lo + (hi - lo) * i as f64 / pts as f64))
            .collect();
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (m, vals)
    };
    let mut rounds = 0;
    let peak = loop {
        let (m, _) = scan(u_lo, u_hi);
        if !m.is_finite() {
            return Err(Error::NumericalDomain {
                context: "quadrature oracle",
                message: "no posterior mass found in the noise-variance scan".into(),
            });
        }
        let need_lo = ig.log_center_value(u_lo) > m - SLICE_CUTOFF_NATS;
        let need_hi = ig.log_center_value(u_hi) > m - SLICE_CUTOFF_NATS;
        if !need_lo && !need_hi {
            break m;
        }
        if need_lo {
            u_lo -= 10.0;
        }
        if need_hi {
            u_hi += 10.0;
        }
        rounds += 1;
        if rounds > 60 {
            return Err(Error::OracleNonconvergence {
                context: "quadrature oracle: noise-variance box kept growing",
                error_estimate: f64::INFINITY,
            });
        }
    };

    // Tighten to the slices that actually carry mass.
    let (_, vals) = scan(u_lo, u_hi);
    let pts = vals.len() - 1;
    let step = (u_hi - u_lo) / pts as f64;
    let first = vals
        .iter()
        .position(|&v| v >= peak - SLICE_CUTOFF_NATS)
        .unwrap_or(0);
    let last = pts
        - vals
            .iter()
            .rev()
            .position(|&v| v >= peak - SLICE_CUTOFF_NATS)
            .unwrap_or(0);
    let t_lo = u_lo + step * first.saturating_sub(1) as f64;
    let t_hi = u_lo + step * (last + 1).min(pts) as f64;

    let coarse = integrate(&ig, t_lo, t_hi, 40, 0.5, 16, 10.0);
    let fine = integrate(&ig, t_lo, t_hi, 56, 0.3, 20, 11.0);
    let error_estimate = (coarse - fine).abs();
    Ok(QuadratureResult {
        log_marginal: fine,
        error_estimate,
        converged: error_estimate.is_finite() && error_estimate <= target_error,
    })
}

/// Exact posterior over all feasible segmentations of a short series, with
/// every segment its own class.
#[derive(Debug, Clone)]
pub struct EnumeratedPosterior {
    /// Series length.
    pub n: usize,
    /// Every feasible state as (change points, normalized probability).
    pub states: Vec<(Vec<usize>, f64)>,
    /// Log of the unnormalized total mass.
    pub log_normalizer: f64,
}

impl EnumeratedPosterior {
    /// Posterior probability of each change point count `0..=k_max`.
    pub fn k_distribution(&self, k_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; k_max + 1];
        for (tau, p) in &self.states {
            out[tau.len()] += p;
        }
        out
    }

    /// Per-time-index change point probability (entry `t-1` for time `t`).
    pub fn cp_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (tau, p) in &self.states {
            for &t in tau {
                out[t - 1] += p;
            }
        }
        out
    }

    /// Probability of an exact change point configuration (0 if infeasible).
    pub fn prob_of(&self, tau: &[usize]) -> f64 {
        self.states
            .iter()
            .find(|(t, _)| t == tau)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Every feasible change point configuration for a series of length `n`:
/// all segment response lengths at least `l_min`, at most `k_max` points.
/// Configurations are emitted in lexicographic order, the empty one first.
pub fn enumerate_feasible_tau(n: usize, l_min: usize, k_max: usize) -> Vec<Vec<usize>> {
    fn recurse(
        n: usize,
        l_min: usize,
        k_max: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        out.push(prefix.clone());
        if prefix.len() == k_max {
            return;
        }
        let base = prefix.last().copied().unwrap_or(1);
        let hi = n.saturating_sub(l_min);
        let mut t = base + l_min;
        while t <= hi {
            prefix.push(t);
            recurse(n, l_min, k_max, prefix, out);
            prefix.pop();
            t += 1;
        }
    }
    let mut out = Vec::new();
    if n >= l_min + 1 {
        recurse(n, l_min, k_max, &mut Vec::new(), &mut out);
    }
    out
}

/// Exhaustive posterior over feasible segmentations (each segment a distinct
/// class), normalized in log space. Exponential in `k_max`; intended for
/// short series only.
pub fn oracle_enumerate(x: &TimeSeries, h: &Hyperparameters) -> Result<EnumeratedPosterior> {
    h.validate()?;
    h.validate_series(x)?;
    let n = x.len();
    let configs = enumerate_feasible_tau(n, h.l_min, h.k_max);
    if configs.is_empty() {
        return Err(Error::invalid_input(
            "enumeration oracle: no feasible segmentation",
        ));
    }
    let mut log_weights = Vec::with_capacity(configs.len());
    for tau in &configs {
        let seg = Segmentation::new(n, tau.clone())?;
        let labels = ClassAssignment::all_distinct(seg.num_segments());
        log_weights.push(log_posterior_tau_k(x, &seg, &labels, h)?);
    }
    let log_normalizer = log_sum_exp(&log_weights);
    let states = configs
        .into_iter()
        .zip(log_weights)
        .map(|(tau, lw)| (tau, (lw - log_normalizer).exp()))
        .collect();
    Ok(EnumeratedPosterior {
        n,
        states,
        log_normalizer,
    })
}
