// SPDX-License-Identifier: MIT OR Apache-2.0

//! Result serialization: the versioned result JSON, per-iteration trace CSV,
//! and the per-time-index plot CSV.

use std::path::Path;

use dpseg::model::{per_time_labels, ClassAssignment, Hyperparameters, Segmentation};
use dpseg::sampler::{ChainRun, Mode, MoveStats, PosteriorSummary};
use nalgebra::DMatrix;

use crate::json_out::{float_token, Json};
use crate::{Failure, EXIT_NUMERICAL};

pub const SCHEMA_VERSION: u64 = 1;

fn hyper_json(h: &Hyperparameters) -> Json {
    let omega_rows: Vec<Json> = (0..h.omega.nrows())
        .map(|i| Json::floats(&h.omega.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let mut j = Json::obj();
    j.push("d_model", Json::UInt(h.d_model as u64));
    j.push("delta", Json::Float(h.delta));
    j.push("lambda_phi", Json::floats(h.lambda_phi.as_slice()));
    j.push("beta", Json::Float(h.beta));
    j.push("omega", Json::Arr(omega_rows));
    j.push("nu", Json::Float(h.nu));
    j.push("gamma", Json::Float(h.gamma));
    j.push("alpha", Json::Float(h.alpha));
    j.push("k_max", Json::UInt(h.k_max as u64));
    j.push("l_min", Json::UInt(h.l_min as u64));
    j.push("n_iter", Json::UInt(h.n_iter as u64));
    j.push("nc_iter", Json::UInt(h.nc_iter as u64));
    j.push("m_aux", Json::UInt(h.m_aux as u64));
    j.push("seed", Json::UInt(h.seed));
    j.push("burn_in", Json::Float(h.burn_in));
    j.push("thin", Json::UInt(h.thin as u64));
    j
}

fn moves_json(stats: &MoveStats) -> Json {
    let mut j = Json::obj();
    j.push("birth_attempts", Json::UInt(stats.birth_attempts));
    j.push("birth_accepts", Json::UInt(stats.birth_accepts));
    j.push("death_attempts", Json::UInt(stats.death_attempts));
    j.push("death_accepts", Json::UInt(stats.death_accepts));
    j.push("relocation_attempts", Json::UInt(stats.relocation_attempts));
    j.push("relocation_accepts", Json::UInt(stats.relocation_accepts));
    j
}

fn state_json(tau: &[usize], labels: &[usize], log_post: Option<f64>) -> Json {
    let mut j = Json::obj();
    j.push("k", Json::UInt(tau.len() as u64));
    j.push("tau", Json::uints(tau));
    j.push("labels", Json::uints(labels));
    if let Some(lp) = log_post {
        j.push("log_post", Json::Float(lp));
    }
    j
}

fn co_cluster_row_major(m: &DMatrix<f64>) -> Json {
    let mut flat = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            flat.push(m[(i, j)]);
        }
    }
    Json::floats(&flat)
}

fn pooled_stats(runs: &[ChainRun]) -> MoveStats {
    let mut total = MoveStats::default();
    for r in runs {
        total.birth_attempts += r.stats.birth_attempts;
        total.birth_accepts += r.stats.birth_accepts;
        total.death_attempts += r.stats.death_attempts;
        total.death_accepts += r.stats.death_accepts;
        total.relocation_attempts += r.stats.relocation_attempts;
        total.relocation_accepts += r.stats.relocation_accepts;
    }
    total
}

/// Everything the result file records about one invocation.
pub struct ResultInputs<'a> {
    pub mode: Mode,
    pub input: &'a Path,
    pub n: usize,
    pub hyper: &'a Hyperparameters,
    pub chain_seeds: &'a [u64],
    pub per_chain: &'a [PosteriorSummary],
    pub runs: &'a [ChainRun],
    pub pooled: &'a PosteriorSummary,
    /// `None` suppresses the timestamp field (`--deterministic`).
    pub generated_at_unix: Option<u64>,
}

pub fn result_json(inp: &ResultInputs<'_>) -> Json {
    let mut root = Json::obj();
    root.push("schema_version", Json::UInt(SCHEMA_VERSION));
    if let Some(ts) = inp.generated_at_unix {
        root.push("generated_at_unix", Json::UInt(ts));
    }
    root.push("mode", Json::Str(inp.mode.to_string()));
    root.push("input", Json::Str(inp.input.display().to_string()));
    root.push("n", Json::UInt(inp.n as u64));
    root.push("hyper", hyper_json(inp.hyper));

    let chains: Vec<Json> = inp
        .per_chain
        .iter()
        .zip(inp.chain_seeds)
        .zip(inp.runs)
        .map(|((s, &seed), run)| {
            let mut c = Json::obj();
            c.push("seed", Json::UInt(seed));
            c.push("k_histogram", Json::floats(&s.k_histogram));
            c.push(
                "map",
                state_json(&s.map_tau, &s.map_labels, Some(s.map_log_post)),
            );
            let mut lp = Json::obj();
            lp.push("mean", Json::Float(s.log_post_mean));
            lp.push("min", Json::Float(s.log_post_min));
            lp.push("max", Json::Float(s.log_post_max));
            c.push("log_post_trace_summary", lp);
            c.push("retained", Json::UInt(s.retained as u64));
            c.push("moves", moves_json(&run.stats));
            c
        })
        .collect();
    root.push("chains", Json::Arr(chains));

    root.push("cp_marginal", Json::floats(&inp.pooled.cp_marginal));
    if let Some(co) = &inp.pooled.co_cluster {
        root.push("co_cluster", co_cluster_row_major(co));
    }

    let mut diag = Json::obj();
    diag.push("retained_total", Json::UInt(inp.pooled.retained as u64));
    diag.push(
        "distinct_patterns",
        Json::UInt(inp.pooled.pattern_counts.len() as u64),
    );
    diag.push("k_histogram", Json::floats(&inp.pooled.k_histogram));
    diag.push(
        "map",
        state_json(
            &inp.pooled.map_tau,
            &inp.pooled.map_labels,
            Some(inp.pooled.map_log_post),
        ),
    );
    diag.push("moves", moves_json(&pooled_stats(inp.runs)));
    root.push("diagnostics", diag);

    root.push(
        "point_estimate",
        state_json(&inp.pooled.point_tau, &inp.pooled.point_labels, None),
    );
    root
}

/// One row per recorded state (row 0 of each chain is the initial state);
/// `tau` and `labels` are semicolon-joined so the file stays one-row-per-draw.
pub fn traces_csv(runs: &[ChainRun]) -> String {
    let mut out = String::from("chain,iteration,k,log_post,tau,labels\n");
    for (chain, run) in runs.iter().enumerate() {
        for (iteration, draw) in run.draws.iter().enumerate() {
            let tau = draw
                .tau
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let labels = draw
                .labels
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{chain},{iteration},{},{},{tau},{labels}\n",
                draw.tau.len(),
                float_token(draw.log_post),
            ));
        }
    }
    out
}

/// Per-time-index CSV: change point marginal and the point-estimate class
/// label of every sample.
pub fn plot_csv(pooled: &PosteriorSummary) -> Result<String, Failure> {
    let seg = Segmentation::new(pooled.n, pooled.point_tau.clone())
        .map_err(|e| Failure::new(EXIT_NUMERICAL, format!("point estimate invalid: {e}")))?;
    let c = ClassAssignment::compacted(&pooled.point_labels);
    let classes = per_time_labels(&seg, &c, pooled.n);
    let mut out = String::from("t,cp_marginal,point_class\n");
    for t in 1..=pooled.n {
        out.push_str(&format!(
            "{t},{},{}\n",
            float_token(pooled.cp_marginal[t - 1]),
            classes[t - 1]
        ));
    }
    Ok(out)
}
