// SPDX-License-Identifier: MIT OR Apache-2.0

//! The trans-dimensional sampler over segmentations, and chain summaries.
//!
//! Each outer iteration of the shared-class mode runs, in order: a refresh
//! of every segment's coefficient vector, several nested sweeps of the
//! class parameters and labels, and one Metropolis–Hastings move on the
//! change points (birth, death, or relocation). The baseline mode keeps
//! every segment in its own class and runs only the change point moves,
//! with all continuous parameters integrated out in closed form.
//!
//! Move kinds at `K` current change points:
//! * **birth** — insert a point drawn uniformly from the feasible set; the
//!   right half of the split segment becomes a fresh class.
//! * **death** — remove a uniformly chosen point; the merged segment keeps
//!   the left segment's class.
//! * **relocation** — for each point in rank order, redraw it uniformly
//!   from the feasible positions within its neighbor gap and accept or
//!   reject jointly. The gap set is identical from both endpoints of the
//!   move, so the proposal is symmetric and `K` never changes here; births
//!   and deaths are the only moves that change dimension.
//!
//! Acceptance ratios for birth and death are computed by independent
//! formulas (not by negating one another) so their antisymmetry is a
//! checkable property rather than an artifact.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::gibbs::{
    refresh_segment_params, resample_labels, sample_class_triple_from_base, sweep_class_covs,
    sweep_class_means, sweep_class_noise_vars,
};
use crate::marginal::log_posterior_tau_k;
use crate::model::{
    per_time_labels, segment_data, ClassAssignment, ClassParams, Hyperparameters, Segmentation,
    TimeSeries,
};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Sampler flavor: independent classes per segment, or shared classes under
/// the Dirichlet-process prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every segment keeps its own class; continuous parameters stay
    /// integrated out.
    Baseline,
    /// Segments share classes; class parameters and labels are resampled
    /// between change point moves.
    Dp,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Baseline => write!(f, "baseline"),
            Mode::Dp => write!(f, "dp"),
        }
    }
}

/// Probabilities of picking each move kind at `k` current change points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbabilities {
    pub birth: f64,
    pub death: f64,
    pub update: f64,
}

/// Move kind distribution: equal thirds in the interior, with the blocked
/// direction's mass folded into the update at the boundaries `k = 0` and
/// `k = k_max`.
pub fn move_probabilities(k: usize, k_max: usize) -> MoveProbabilities {
    debug_assert!(k <= k_max);
    if k == 0 {
        MoveProbabilities {
            birth: 0.5,
            death: 0.0,
            update: 0.5,
        }
    } else if k == k_max {
        MoveProbabilities {
            birth: 0.0,
            death: 0.5,
            update: 0.5,
        }
    } else {
        MoveProbabilities {
            birth: 1.0 / 3.0,
            death: 1.0 / 3.0,
            update: 1.0 / 3.0,
        }
    }
}

/// All time indices where a new change point may be inserted: `t` splits its
/// segment into halves of response length at least `l_min` each.
pub fn feasible_birth_positions(seg: &Segmentation, l_min: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..seg.num_segments() {
        let lo = seg.boundary(i);
        let hi = seg.boundary(i + 1);
        for t in (lo + l_min)..=hi.saturating_sub(l_min) {
            out.push(t);
        }
    }
    out
}

/// Feasible positions for relocating the change point of the given rank
/// (1-based) within the gap between its neighbors, as an inclusive range.
/// The current position is always a member, and the set depends only on the
/// neighbors, so it is the same before and after any move within the gap.
pub fn relocation_gap(seg: &Segmentation, rank: usize, l_min: usize) -> (usize, usize) {
    debug_assert!(rank >= 1 && rank <= seg.k());
    let lo = seg.boundary(rank - 1) + l_min;
    let hi = seg.boundary(rank + 1) - l_min;
    debug_assert!(lo <= seg.boundary(rank) && seg.boundary(rank) <= hi);
    (lo, hi)
}

/// Log acceptance ratio of a birth move from a state with `k_cur` change
/// points and `s_len` feasible insertion positions, to a candidate with log
/// posterior `lp_cand`: the posterior ratio times
/// `[d_{k+1}·1/(k+1)] / [b_k·1/s_len]` for proposal asymmetry.
pub fn birth_log_ratio(lp_cand: f64, lp_cur: f64, k_cur: usize, s_len: usize, k_max: usize) -> f64 {
    let b_cur = move_probabilities(k_cur, k_max).birth;
    let d_next = move_probabilities(k_cur + 1, k_max).death;
    lp_cand - lp_cur + (d_next / (k_cur + 1) as f64).ln() - (b_cur / s_len as f64).ln()
}

/// Log acceptance ratio of a death move from a state with `k_cur` change
/// points, where the candidate has log posterior `lp_cand` and
/// `s_cand_len` feasible insertion positions (the reverse birth's choices):
/// the posterior ratio times `[b_{k−1}·1/s_cand_len] / [d_k·1/k]`.
pub fn death_log_ratio(
    lp_cand: f64,
    lp_cur: f64,
    k_cur: usize,
    s_cand_len: usize,
    k_max: usize,
) -> f64 {
    debug_assert!(k_cur >= 1);
    let d_cur = move_probabilities(k_cur, k_max).death;
    let b_prev = move_probabilities(k_cur - 1, k_max).birth;
    lp_cand - lp_cur + (b_prev / s_cand_len as f64).ln() - (d_cur / k_cur as f64).ln()
}

/// Attempt/accept counters per move kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct MoveStats {
    pub birth_attempts: u64,
    pub birth_accepts: u64,
    pub death_attempts: u64,
    pub death_accepts: u64,
    pub relocation_attempts: u64,
    pub relocation_accepts: u64,
}

/// Full sampler state: segmentation, dense class labels, class parameter
/// triples, per-segment coefficients, and the cached collapsed log
/// posterior of `(segmentation, labels)`.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub seg: Segmentation,
    pub labels: Vec<usize>,
    pub params: ClassParams,
    pub phis: Vec<DVector<f64>>,
    pub log_post: f64,
}

/// One recorded draw: change points, canonical labels, log posterior.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub tau: Vec<usize>,
    pub labels: Vec<usize>,
    pub log_post: f64,
}

/// A finished chain: one record per iteration (the initial state first)
/// plus move statistics.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: Vec<IterationRecord>,
    pub stats: MoveStats,
}

fn log_post_of(
    x: &TimeSeries,
    seg: &Segmentation,
    labels: &[usize],
    h: &Hyperparameters,
) -> Result<f64> {
    log_posterior_tau_k(x, seg, &ClassAssignment::compacted(labels), h)
}

/// Builds the starting state: no change points, a single class whose mean
/// is the ridge fit of the whole series, covariance `Ω`, and noise variance
/// the ridge residual variance.
pub fn init_state(x: &TimeSeries, h: &Hyperparameters, _mode: Mode) -> Result<ChainState> {
    h.validate()?;
    h.validate_series(x)?;
    let seg = Segmentation::new(x.len(), vec![])?;
    seg.validate(h.l_min, h.k_max)?;
    let (y, g) = segment_data(x, &seg, 0, h.d_model);
    let mut a = g.transpose() * &g;
    for i in 0..h.d_model {
        a[(i, i)] += 1.0 / h.delta;
    }
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        context: "initial state: ridge gram matrix",
        matrix: a,
    })?;
    let mean = chol.solve(&(g.transpose() * &y));
    let resid = &y - &g * &mean;
    let noise_var = (resid.dot(&resid) / y.len() as f64).max(1e-8 * h.gamma);
    let labels = vec![0usize];
    let log_post = log_post_of(x, &seg, &labels, h)?;
    Ok(ChainState {
        seg,
        labels,
        params: ClassParams {
            means: vec![mean.clone()],
            covs: vec![h.omega.clone()],
            noise_vars: vec![noise_var],
        },
        phis: vec![mean],
        log_post,
    })
}

/// Applies one change point move (birth, death, or the relocation sweep).
fn mh_move(
    state: &mut ChainState,
    x: &TimeSeries,
    h: &Hyperparameters,
    mode: Mode,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    let k = state.seg.k();
    let probs = move_probabilities(k, h.k_max);
    let u: f64 = rng.random();
    if u < probs.birth {
        birth_move(state, x, h, mode, rng, stats)
    } else if u < probs.birth + probs.death {
        death_move(state, x, h, mode, rng, stats)
    } else {
        relocation_move(state, x, h, rng, stats)
    }
}

fn birth_move(
    state: &mut ChainState,
    x: &TimeSeries,
    h: &Hyperparameters,
    mode: Mode,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    stats.birth_attempts += 1;
    let positions = feasible_birth_positions(&state.seg, h.l_min);
    if positions.is_empty() {
        return Ok(());
    }
    let t = positions[rng.random_range(0..positions.len())];
    let split_at = state.seg.segment_of(t);
    let mut tau = state.seg.tau().to_vec();
    tau.insert(split_at, t);
    let cand_seg = Segmentation::new(state.seg.n(), tau)?;
    let mut cand_labels = state.labels.clone();
    // Fresh class id: one past the current maximum, which equals
    // `params.len()` whenever labels are dense.
    let fresh = state.labels.iter().max().map_or(0, |m| m + 1);
    cand_labels.insert(split_at + 1, fresh);
    let lp_cand = log_post_of(x, &cand_seg, &cand_labels, h)?;
    let r = birth_log_ratio(
        lp_cand,
        state.log_post,
        state.seg.k(),
        positions.len(),
        h.k_max,
    );
    if rng.random::<f64>().ln() < r {
        stats.birth_accepts += 1;
        state.seg = cand_seg;
        state.labels = cand_labels;
        state.log_post = lp_cand;
        if mode == Mode::Dp {
            let (mean, cov, noise_var) = sample_class_triple_from_base(h, rng)?;
            state.params.means.push(mean);
            state.params.covs.push(cov);
            state.params.noise_vars.push(noise_var);
            // The new segment starts from its parent's coefficients; the
            // next refresh redraws them from the conditional.
            let parent = state.phis[split_at].clone();
            state.phis.insert(split_at + 1, parent);
        } else {
            state.labels = (0..state.seg.num_segments()).collect();
        }
    }
    Ok(())
}

fn death_move(
    state: &mut ChainState,
    x: &TimeSeries,
    h: &Hyperparameters,
    mode: Mode,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    stats.death_attempts += 1;
    let k = state.seg.k();
    debug_assert!(k >= 1);
    let rank = rng.random_range(1..=k);
    let mut tau = state.seg.tau().to_vec();
    tau.remove(rank - 1);
    let cand_seg = Segmentation::new(state.seg.n(), tau)?;
    let mut cand_labels = state.labels.clone();
    let removed = cand_labels.remove(rank); // right half's class; left keeps its label
    let s_cand_len = feasible_birth_positions(&cand_seg, h.l_min).len();
    let lp_cand = log_post_of(x, &cand_seg, &cand_labels, h)?;
    let r = death_log_ratio(lp_cand, state.log_post, k, s_cand_len, h.k_max);
    if rng.random::<f64>().ln() < r {
        stats.death_accepts += 1;
        state.seg = cand_seg;
        state.log_post = lp_cand;
        if mode == Mode::Dp {
            if !cand_labels.contains(&removed) {
                state.params.remove(removed);
                for l in cand_labels.iter_mut() {
                    if *l > removed {
                        *l -= 1;
                    }
                }
            }
            state.labels = cand_labels;
            state.phis.remove(rank);
        } else {
            state.labels = (0..state.seg.num_segments()).collect();
        }
    }
    Ok(())
}

fn relocation_move(
    state: &mut ChainState,
    x: &TimeSeries,
    h: &Hyperparameters,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    for rank in 1..=state.seg.k() {
        stats.relocation_attempts += 1;
        let (lo, hi) = relocation_gap(&state.seg, rank, h.l_min);
        let t_new = rng.random_range(lo..=hi);
        if t_new == state.seg.boundary(rank) {
            stats.relocation_accepts += 1;
            continue;
        }
        let mut tau = state.seg.tau().to_vec();
        tau[rank - 1] = t_new;
        let cand_seg = Segmentation::new(state.seg.n(), tau)?;
        let lp_cand = log_post_of(x, &cand_seg, &state.labels, h)?;
        if rng.random::<f64>().ln() < lp_cand - state.log_post {
            stats.relocation_accepts += 1;
            state.seg = cand_seg;
            state.log_post = lp_cand;
        }
    }
    Ok(())
}

fn record(state: &ChainState) -> IterationRecord {
    IterationRecord {
        tau: state.seg.tau().to_vec(),
        labels: ClassAssignment::compacted(&state.labels).labels().to_vec(),
        log_post: state.log_post,
    }
}

/// Runs one chain for `h.n_iter` iterations, recording the initial state
/// and the state after each iteration.
pub fn run_chain(
    x: &TimeSeries,
    h: &Hyperparameters,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<ChainRun> {
    let mut state = init_state(x, h, mode)?;
    let mut stats = MoveStats::default();
    let mut draws = Vec::with_capacity(h.n_iter + 1);
    draws.push(record(&state));
    for iteration in 1..=h.n_iter {
        step(&mut state, x, h, mode, rng, &mut stats).map_err(|e| Error::ChainFailure {
            iteration,
            state_dump: format!(
                "tau={:?} labels={:?} log_post={}",
                state.seg.tau(),
                state.labels,
                state.log_post
            ),
            source: Box::new(e),
        })?;
        draws.push(record(&state));
    }
    Ok(ChainRun { draws, stats })
}

/// One full outer iteration.
fn step(
    state: &mut ChainState,
    x: &TimeSeries,
    h: &Hyperparameters,
    mode: Mode,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    if mode == Mode::Dp {
        let refreshed =
            refresh_segment_params(x, &state.seg, &state.labels, &state.params, h, rng)?;
        state.phis = refreshed.phi;
        for _ in 0..h.nc_iter {
            sweep_class_means(&state.phis, &state.labels, &mut state.params, h, rng)?;
            sweep_class_covs(&state.phis, &state.labels, &mut state.params, h, rng)?;
            sweep_class_noise_vars(x, &state.seg, &state.labels, &mut state.params, h, rng)?;
            resample_labels(&state.phis, &mut state.labels, &mut state.params, h, rng)?;
        }
        // Labels may have changed; the cached log posterior must follow.
        state.log_post = log_post_of(x, &state.seg, &state.labels, h)?;
    }
    mh_move(state, x, h, mode, rng, stats)
}

/// Pooled posterior summary over one or more chains.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Series length.
    pub n: usize,
    /// Normalized change point count distribution, length `k_max + 1`.
    pub k_histogram: Vec<f64>,
    /// Probability of each time index being a change point, length `n`.
    pub cp_marginal: Vec<f64>,
    /// Highest-posterior retained state.
    pub map_tau: Vec<usize>,
    pub map_labels: Vec<usize>,
    pub map_log_post: f64,
    /// Point estimate: in shared-class mode the retained state closest (in
    /// squared co-clustering distance) to the mean co-clustering matrix;
    /// in baseline mode the highest-posterior state.
    pub point_tau: Vec<usize>,
    pub point_labels: Vec<usize>,
    /// Mean pairwise same-class probability per time index pair
    /// (shared-class mode only).
    pub co_cluster: Option<DMatrix<f64>>,
    /// Mean / min / max of the retained log posterior trace.
    pub log_post_mean: f64,
    pub log_post_min: f64,
    pub log_post_max: f64,
    /// Distinct retained `(tau, labels)` patterns with their visit counts.
    pub pattern_counts: BTreeMap<(Vec<usize>, Vec<usize>), usize>,
    /// Number of retained draws.
    pub retained: usize,
}

/// Retained records of one run under the burn-in and thinning schedule:
/// the first `floor(burn_in · n_iter)` iterations and the initial state are
/// discarded (except that a run with no iterations keeps its only record).
fn retained_records<'a>(
    run: &'a ChainRun,
    h: &Hyperparameters,
) -> impl Iterator<Item = &'a IterationRecord> {
    let burn = (h.burn_in * h.n_iter as f64).floor() as usize;
    let start = (burn + 1).min(run.draws.len() - 1);
    run.draws[start..].iter().step_by(h.thin)
}

fn same_class_indicator(n: usize, tau: &[usize], labels: &[usize]) -> Result<Vec<usize>> {
    let seg = Segmentation::new(n, tau.to_vec())?;
    let c = ClassAssignment::new(labels.to_vec())?;
    Ok(per_time_labels(&seg, &c, n))
}

/// Summarizes retained draws pooled across `runs`.
pub fn summarize(
    runs: &[ChainRun],
    n: usize,
    h: &Hyperparameters,
    mode: Mode,
) -> Result<PosteriorSummary> {
    let mut pattern_counts: BTreeMap<(Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
    let mut retained = 0usize;
    let mut lp_sum = 0.0;
    let mut lp_min = f64::INFINITY;
    let mut lp_max = f64::NEG_INFINITY;
    let mut map: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for run in runs {
        for rec in retained_records(run, h) {
            retained += 1;
            lp_sum += rec.log_post;
            lp_min = lp_min.min(rec.log_post);
            lp_max = lp_max.max(rec.log_post);
            if map.as_ref().is_none_or(|(best, _, _)| rec.log_post > *best) {
                map = Some((rec.log_post, rec.tau.clone(), rec.labels.clone()));
            }
            *pattern_counts
                .entry((rec.tau.clone(), rec.labels.clone()))
                .or_insert(0) += 1;
        }
    }
    if retained == 0 {
        return Err(Error::invalid_input("summarize: no retained draws"));
    }
    let (map_log_post, map_tau, map_labels) = map.expect("retained > 0");

    let mut k_histogram = vec![0.0; h.k_max + 1];
    let mut cp_marginal = vec![0.0; n];
    for ((tau, _), &w) in &pattern_counts {
        k_histogram[tau.len()] += w as f64;
        for &t in tau {
            cp_marginal[t - 1] += w as f64;
        }
    }
    let total = retained as f64;
    k_histogram.iter_mut().for_each(|v| *v /= total);
    cp_marginal.iter_mut().for_each(|v| *v /= total);

    let (co_cluster, point_tau, point_labels) = if mode == Mode::Dp {
        let mut co = DMatrix::zeros(n, n);
        for ((tau, labels), &w) in &pattern_counts {
            let ptl = same_class_indicator(n, tau, labels)?;
            let w = w as f64;
            for t in 0..n {
                for t2 in 0..n {
                    if ptl[t] == ptl[t2] {
                        co[(t, t2)] += w;
                    }
                }
            }
        }
        co /= total;
        // Point estimate: retained pattern nearest to the mean co-clustering
        // matrix. A split between two same-class segments leaves the
        // matrix unchanged, so distance ties go to fewer change points
        // (then first key order).
        let mut best: Option<(f64, &(Vec<usize>, Vec<usize>))> = None;
        for (key, _) in &pattern_counts {
            let ptl = same_class_indicator(n, &key.0, &key.1)?;
            let mut dist = 0.0;
            for t in 0..n {
                for t2 in 0..n {
                    let ind = if ptl[t] == ptl[t2] { 1.0 } else { 0.0 };
                    let diff = ind - co[(t, t2)];
                    dist += diff * diff;
                }
            }
            let better = match best.as_ref() {
                None => true,
                Some((b, k)) => {
                    dist < b - 1e-9 || ((dist - b).abs() <= 1e-9 && key.0.len() < k.0.len())
                }
            };
            if better {
                best = Some((dist, key));
            }
        }
        let (_, key) = best.expect("at least one pattern");
        (Some(co), key.0.clone(), key.1.clone())
    } else {
        (None, map_tau.clone(), map_labels.clone())
    };

    Ok(PosteriorSummary {
        n,
        k_histogram,
        cp_marginal,
        map_tau,
        map_labels,
        map_log_post,
        point_tau,
        point_labels,
        co_cluster,
        log_post_mean: lp_sum / total,
        log_post_min: lp_min,
        log_post_max: lp_max,
        pattern_counts,
        retained,
    })
}
