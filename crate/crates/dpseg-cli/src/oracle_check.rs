// SPDX-License-Identifier: MIT OR Apache-2.0

//! Built-in cross-checks of the analytical core against brute-force
//! references, runnable from the command line as a self-test.
//!
//! Two suites:
//!
//! * **quadrature** — the closed-form class marginal likelihood against
//!   numerical integration over coefficients and noise variance;
//! * **enumeration** — the distinct-labels chain's segmentation posterior
//!   against exhaustive enumeration on a short step series, compared in
//!   total variation.

use std::collections::BTreeMap;

use dpseg::marginal::log_marginal_class;
use dpseg::model::{segment_data, Hyperparameters, Segmentation};
use dpseg::oracle::{oracle_enumerate, oracle_quadrature};
use dpseg::rng::RngStream;
use dpseg::sampler::{run_chain, summarize, Mode};
use dpseg::synth::{generate, RegimeClass};
use nalgebra::DVector;

use crate::json_out::Json;

/// Outcome of one check: a table line plus, on failure, the offending
/// instance serialized for reproduction.
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub instance: Option<Json>,
}

fn step_down<T: Copy>(options: &[T], i: usize) -> T {
    options[i % options.len()]
}

/// Randomized closed-form vs. quadrature instances. Deterministic in `seed`.
pub fn quadrature_suite(seed: u64, tol: f64) -> Vec<CheckLine> {
    let deltas = [0.3, 10.0, 2.0];
    let nus = [2.0, 0.5, 8.0];
    let gammas = [1.0, 0.4, 3.0];
    let shifts = [0.0, 0.25];
    let mut lines = Vec::new();
    for case in 0..8usize {
        let d_model = 1 + case % 2;
        let rows = 4 + 2 * case;
        let mut rng = RngStream::for_chain(seed, case as u64);
        let class = if d_model == 1 {
            RegimeClass::new(vec![0.3], 1.0)
        } else {
            RegimeClass::new(vec![0.2, 0.5], 1.0)
        }
        .expect("stationary by construction");
        // One segment of rows + 1 samples; the first sample is lag-only, so
        // the response length is exactly `rows`.
        let data = generate(&[class], &[0], &[rows + 1], &mut rng).expect("valid plan");
        let seg = Segmentation::new(rows + 1, vec![]).expect("no change points");
        let (y, g) = segment_data(&data.series, &seg, 0, d_model);

        let mut h = Hyperparameters::standard(d_model, step_down(&gammas, case));
        h.delta = step_down(&deltas, case);
        h.nu = step_down(&nus, case);
        h.lambda_phi = DVector::from_element(d_model, step_down(&shifts, case));

        let name = format!("quadrature case {case} (d={d_model}, rows={rows})");
        let closed = log_marginal_class(&y, &g, &h);
        let quad = oracle_quadrature(&y, &g, &h, 1e-8);
        let (pass, detail, instance) = match (&closed, &quad) {
            (Ok(c), Ok(q)) => {
                let diff = (c - q.log_marginal).abs();
                let ok = diff <= tol && q.converged;
                let detail = format!(
                    "|closed - quadrature| = {diff:.3e} (target {tol:.1e}, quadrature error estimate {:.1e})",
                    q.error_estimate
                );
                let instance = (!ok).then(|| {
                    let mut j = Json::obj();
                    j.push("case", Json::UInt(case as u64));
                    j.push("d_model", Json::UInt(d_model as u64));
                    j.push("delta", Json::Float(h.delta));
                    j.push("nu", Json::Float(h.nu));
                    j.push("gamma", Json::Float(h.gamma));
                    j.push("lambda_phi", Json::floats(h.lambda_phi.as_slice()));
                    j.push("closed_form", Json::Float(*c));
                    j.push("quadrature", Json::Float(q.log_marginal));
                    j.push("error_estimate", Json::Float(q.error_estimate));
                    j.push("y", Json::floats(y.as_slice()));
                    j.push("design_row_major", Json::floats(g.transpose().as_slice()));
                    j
                });
                (ok, detail, instance)
            }
            _ => {
                let err = closed
                    .err()
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| quad.err().map(|e| e.to_string()).unwrap_or_default());
                let mut j = Json::obj();
                j.push("case", Json::UInt(case as u64));
                j.push("error", Json::Str(err.clone()));
                (false, format!("evaluation failed: {err}"), Some(j))
            }
        };
        lines.push(CheckLine {
            name,
            pass,
            detail,
            instance,
        });
    }
    lines
}

/// Chain vs. exhaustive enumeration on a 16-sample mean-step series,
/// distinct-labels mode, compared in total variation over all feasible
/// segmentations. Deterministic in `seed`.
pub fn enumeration_suite(seed: u64, iters: usize, tv_threshold: f64) -> CheckLine {
    let classes = [
        RegimeClass::new(vec![0.0], 1.0).expect("stationary"),
        RegimeClass::new(vec![4.0], 1.0).expect("stationary"),
    ];
    let mut data_rng = RngStream::new(seed);
    let data = generate(&classes, &[0, 1], &[8, 8], &mut data_rng).expect("valid plan");
    let x = &data.series;

    let mut h = Hyperparameters::standard(1, x.sample_variance());
    h.l_min = 2;
    h.k_max = 2;
    h.n_iter = iters;
    h.burn_in = 0.2;
    h.seed = seed;

    let name = format!("enumeration (n={}, iters={iters})", x.len());
    let fail = |detail: String, instance: Option<Json>| CheckLine {
        name: name.clone(),
        pass: false,
        detail,
        instance,
    };

    let exact = match oracle_enumerate(x, &h) {
        Ok(e) => e,
        Err(e) => return fail(format!("enumeration failed: {e}"), None),
    };
    let mut chain_rng = RngStream::for_chain(seed, 1);
    let run = match run_chain(x, &h, Mode::Baseline, &mut chain_rng) {
        Ok(r) => r,
        Err(e) => return fail(format!("chain failed: {e}"), None),
    };
    let summary = match summarize(std::slice::from_ref(&run), x.len(), &h, Mode::Baseline) {
        Ok(s) => s,
        Err(e) => return fail(format!("summary failed: {e}"), None),
    };

    let total = summary.retained as f64;
    let mut empirical: BTreeMap<&[usize], f64> = BTreeMap::new();
    for ((tau, _labels), count) in &summary.pattern_counts {
        *empirical.entry(tau.as_slice()).or_insert(0.0) += *count as f64 / total;
    }
    let mut tv = 0.0;
    for (tau, p) in &exact.states {
        tv += (empirical.remove(tau.as_slice()).unwrap_or(0.0) - p).abs();
    }
    // Visited states outside the enumerated support would be sampler bugs;
    // they still count toward the distance.
    tv += empirical.values().sum::<f64>();
    tv *= 0.5;

    let pass = tv <= tv_threshold;
    let instance = (!pass).then(|| {
        let mut j = Json::obj();
        j.push("seed", Json::UInt(seed));
        j.push("iters", Json::UInt(iters as u64));
        j.push("total_variation", Json::Float(tv));
        j.push("threshold", Json::Float(tv_threshold));
        j.push("series", Json::floats(x.samples()));
        j
    });
    CheckLine {
        name,
        pass,
        detail: format!(
            "TV(chain, exact) = {tv:.4} over {} states (threshold {tv_threshold})",
            exact.states.len()
        ),
        instance,
    }
}
