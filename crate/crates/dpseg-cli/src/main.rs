// SPDX-License-Identifier: MIT OR Apache-2.0

//! `dpseg` — Bayesian change point segmentation of univariate time series,
//! with optional pooling of segment parameters across repeating regimes.
//!
//! Subcommands:
//!
//! * `segment` — run the sampler on one numeric CSV column, write result JSON;
//! * `simulate` — generate a synthetic series plus ground truth from a
//!   scenario file;
//! * `evaluate` — score a result against ground truth (change point F1,
//!   adjusted Rand index);
//! * `oracle-check` — cross-check the analytical core against brute-force
//!   references.

mod config;
mod json_out;
mod oracle_check;
mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dpseg::eval::{adjusted_rand_index, cp_f1};
use dpseg::model::{per_time_labels, ClassAssignment, Hyperparameters, Segmentation, TimeSeries};
use dpseg::rng::RngStream;
use dpseg::sampler::{run_chain, summarize, ChainRun, Mode};
use dpseg::synth::generate;
use json_out::Json;

/// File missing/unreadable, or a malformed data file.
pub const EXIT_IO: i32 = 2;
/// Invalid hyperparameters, config, scenario, or input schema.
pub const EXIT_INVALID_CONFIG: i32 = 3;
/// Numerical failure at runtime; the failing state goes to stderr.
pub const EXIT_NUMERICAL: i32 = 4;
/// A built-in cross-check failed.
pub const EXIT_ORACLE_MISMATCH: i32 = 1;

/// A command failure: process exit code plus a message for stderr.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dpseg",
    version,
    about = "Bayesian change point segmentation with repeating-regime pooling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler on one numeric CSV column and write result JSON.
    Segment(Box<SegmentArgs>),
    /// Generate a synthetic series and its ground truth from a scenario file.
    Simulate(SimulateArgs),
    /// Score a result JSON against a ground-truth JSON.
    Evaluate(EvaluateArgs),
    /// Cross-check the analytical core against brute-force references.
    OracleCheck(OracleCheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Segment parameters pooled across repeating regimes.
    Dp,
    /// Every segment keeps its own parameters.
    Baseline,
}

impl ModeArg {
    fn to_mode(self) -> Mode {
        match self {
            ModeArg::Dp => Mode::Dp,
            ModeArg::Baseline => Mode::Baseline,
        }
    }
}

#[derive(clap::Args)]
struct SegmentArgs {
    /// Input CSV file (one value per row in the selected column).
    #[arg(long)]
    input: PathBuf,
    /// 0-based column index to read.
    #[arg(long, default_value_t = 0)]
    column: usize,
    /// Skip the first line of the input.
    #[arg(long)]
    has_header: bool,
    /// Flat TOML config mirroring the hyperparameter names; flags given on
    /// the command line override file values. Vector/matrix-valued settings
    /// (lambda_phi, omega) are file-only.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampler mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Dp)]
    mode: ModeArg,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also write every recorded state as CSV.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Also write per-time-index plot data (change point marginal and point
    /// class) next to the output file.
    #[arg(long)]
    emit_plot_data: bool,
    /// Suppress the timestamp so identical invocations produce
    /// byte-identical output.
    #[arg(long)]
    deterministic: bool,
    /// Independent chains; chain i is seeded with seed + i.
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Base random seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Regression dimension: intercept plus d_model - 1 lags (default 2).
    #[arg(long)]
    d_model: Option<usize>,
    /// Outer sampler iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Nested class sweeps per outer iteration.
    #[arg(long)]
    nc_iters: Option<usize>,
    /// Prior coefficient scale.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Noise-variance prior shape parameter.
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    /// Noise-variance prior rate parameter (default: sample variance of x).
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Class-covariance prior degrees of freedom.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Concentration of the class-sharing prior.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Maximum number of change points.
    #[arg(long)]
    k_max: Option<usize>,
    /// Minimum segment response length.
    #[arg(long)]
    l_min: Option<usize>,
    /// Auxiliary draws in the label sweep.
    #[arg(long)]
    m_aux: Option<usize>,
    /// Fraction of iterations discarded as burn-in.
    #[arg(long, allow_negative_numbers = true)]
    burn_in: Option<f64>,
    /// Keep every thin-th retained draw.
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario TOML file (classes, plan, seed).
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path; the ground truth goes to the same path with a
    /// .truth.json extension.
    #[arg(long, required_unless_present = "preview")]
    out: Option<PathBuf>,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print summary statistics without writing anything.
    #[arg(long)]
    preview: bool,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Result JSON produced by `segment`.
    #[arg(long)]
    result: PathBuf,
    /// Ground-truth JSON produced by `simulate`.
    #[arg(long)]
    truth: PathBuf,
    /// Matching window (samples) for change point F1.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Also write the scores as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for interface uniformity; evaluation draws no random numbers.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Quadrature,
    Enumeration,
}

#[derive(clap::Args)]
struct OracleCheckArgs {
    /// Which checks to run.
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    /// Total-variation tolerance for the enumeration check.
    #[arg(long, default_value_t = 0.05)]
    tv_threshold: f64,
    /// Absolute log-marginal tolerance for the quadrature checks.
    #[arg(long, default_value_t = 1e-6)]
    quad_tol: f64,
    /// Seed for instance generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chain iterations for the enumeration check.
    #[arg(long, default_value_t = 250_000)]
    enum_iters: usize,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(args) => cmd_segment(*args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    };
    if let Err(f) = result {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

fn read_series_csv(path: &Path, column: usize, has_header: bool) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if index == 0 && has_header {
            continue;
        }
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(column).map(str::trim).ok_or_else(|| {
            Failure::new(
                EXIT_IO,
                format!("{}:{line_no}: missing column {column}", path.display()),
            )
        })?;
        let value: f64 = field.parse().map_err(|_| {
            Failure::new(
                EXIT_IO,
                format!(
                    "{}:{line_no}: cannot parse '{field}' as a number",
                    path.display()
                ),
            )
        })?;
        if !value.is_finite() {
            return Err(Failure::new(
                EXIT_IO,
                format!("{}:{line_no}: non-finite value", path.display()),
            ));
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Failure::new(
            EXIT_IO,
            format!("{}: no data rows", path.display()),
        ));
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!("{}: not valid JSON: {e}", path.display()),
        )
    })
}

fn json_u64(v: &serde_json::Value, key: &str, ctx: &str) -> Result<u64, Failure> {
    v.get(key)
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| {
            Failure::new(
                EXIT_INVALID_CONFIG,
                format!("schema mismatch: {ctx}: missing or non-integer field '{key}'"),
            )
        })
}

fn json_usize_array(v: &serde_json::Value, key: &str, ctx: &str) -> Result<Vec<usize>, Failure> {
    let err = || {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!(
                "schema mismatch: {ctx}: field '{key}' must be an array of non-negative integers"
            ),
        )
    };
    v.get(key)
        .and_then(serde_json::Value::as_array)
        .ok_or_else(err)?
        .iter()
        .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(err))
        .collect()
}

fn check_schema_version(v: &serde_json::Value, ctx: &str) -> Result<(), Failure> {
    let version = json_u64(v, "schema_version", ctx)?;
    if version != report::SCHEMA_VERSION {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            format!(
                "schema mismatch: {ctx}: schema_version {version}, expected {}",
                report::SCHEMA_VERSION
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// segment

fn apply_flag_overrides(h: &mut Hyperparameters, a: &SegmentArgs) {
    if let Some(v) = a.iters {
        h.n_iter = v;
    }
    if let Some(v) = a.nc_iters {
        h.nc_iter = v;
    }
    if let Some(v) = a.delta {
        h.delta = v;
    }
    if let Some(v) = a.nu {
        h.nu = v;
    }
    if let Some(v) = a.beta {
        h.beta = v;
    }
    if let Some(v) = a.alpha {
        h.alpha = v;
    }
    if let Some(v) = a.k_max {
        h.k_max = v;
    }
    if let Some(v) = a.l_min {
        h.l_min = v;
    }
    if let Some(v) = a.m_aux {
        h.m_aux = v;
    }
    if let Some(v) = a.burn_in {
        h.burn_in = v;
    }
    if let Some(v) = a.thin {
        h.thin = v;
    }
}

fn chain_failure_report(e: dpseg::Error) -> Failure {
    if let dpseg::Error::ChainFailure {
        iteration,
        state_dump,
        source,
    } = &e
    {
        let mut j = Json::obj();
        j.push("error", Json::Str(source.to_string()));
        j.push("iteration", Json::UInt(*iteration as u64));
        j.push("state", Json::Str(state_dump.clone()));
        eprintln!("{}", j.render());
        Failure::new(
            EXIT_NUMERICAL,
            format!("chain failed at iteration {iteration}; failing state written to stderr"),
        )
    } else {
        Failure::new(EXIT_NUMERICAL, e.to_string())
    }
}

fn cmd_segment(args: SegmentArgs) -> Result<(), Failure> {
    let samples = read_series_csv(&args.input, args.column, args.has_header)?;
    let series = TimeSeries::new(samples)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.input.display())))?;
    let n = series.len();

    let file = match &args.config {
        Some(path) => config::load_hyper_config(path)?,
        None => config::FileOverrides::default(),
    };
    let d_model = args.d_model.or(file.d_model).unwrap_or(2);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let gamma = args.gamma.or(file.gamma);

    let mut h = Hyperparameters::standard(d_model, 1.0);
    if let Some(path) = &args.config {
        file.apply_to(&mut h, path)?;
    }
    apply_flag_overrides(&mut h, &args);
    h.gamma = gamma.unwrap_or_else(|| series.sample_variance());
    h.seed = seed;

    if args.chains == 0 {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            "chains must be at least 1",
        ));
    }
    h.validate()
        .and_then(|()| h.validate_series(&series))
        .map_err(|e| Failure::new(EXIT_INVALID_CONFIG, e.to_string()))?;

    let mode = args.mode.to_mode();
    let chain_seeds: Vec<u64> = (0..args.chains)
        .map(|i| seed.wrapping_add(i as u64))
        .collect();
    let results: Vec<dpseg::Result<ChainRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.chains)
            .map(|i| {
                let h = &h;
                let x = &series;
                scope.spawn(move || {
                    let mut rng = RngStream::for_chain(h.seed, i as u64);
                    run_chain(x, h, mode, &mut rng)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("chain thread panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(args.chains);
    for result in results {
        runs.push(result.map_err(chain_failure_report)?);
    }

    let numerical = |e: dpseg::Error| Failure::new(EXIT_NUMERICAL, e.to_string());
    // Per-chain blocks report only mode-independent fields (k histogram,
    // MAP, trace summary), so they are summarized in distinct-labels mode,
    // which skips the per-chain co-clustering pass; co-clustering pools
    // across chains in the combined summary below.
    let per_chain = runs
        .iter()
        .map(|run| summarize(std::slice::from_ref(run), n, &h, Mode::Baseline))
        .collect::<dpseg::Result<Vec<_>>>()
        .map_err(numerical)?;
    let pooled = summarize(&runs, n, &h, mode).map_err(numerical)?;

    let generated_at_unix = (!args.deterministic).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let result = report::result_json(&report::ResultInputs {
        mode,
        input: &args.input,
        n,
        hyper: &h,
        chain_seeds: &chain_seeds,
        per_chain: &per_chain,
        runs: &runs,
        pooled: &pooled,
        generated_at_unix,
    });
    write_file(&args.out, &result.render())?;

    println!(
        "mode {} | samples {} | chains {} | retained {} | MAP k={} log_post={:.4}",
        mode,
        n,
        args.chains,
        pooled.retained,
        pooled.map_tau.len(),
        pooled.map_log_post
    );
    println!("wrote {}", args.out.display());
    if let Some(traces) = &args.traces {
        write_file(traces, &report::traces_csv(&runs))?;
        println!("wrote {}", traces.display());
    }
    if args.emit_plot_data {
        let plot_path = args.out.with_extension("plot.csv");
        write_file(&plot_path, &report::plot_csv(&pooled)?)?;
        println!("wrote {}", plot_path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let scenario = config::load_scenario(&args.scenario)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let mut rng = RngStream::new(seed);
    let data = generate(
        &scenario.classes,
        &scenario.plan_labels,
        &scenario.plan_lengths,
        &mut rng,
    )
    .map_err(|e| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!("{}: {e}", args.scenario.display()),
        )
    })?;
    let n = data.series.len();

    if args.preview {
        let mean = data.series.samples().iter().sum::<f64>() / n as f64;
        println!(
            "n {n} | segments {} | change points {:?} | seed {seed}",
            scenario.plan_lengths.len(),
            data.tau
        );
        for (v, name) in scenario.class_names.iter().enumerate() {
            let count = data.segment_labels.iter().filter(|&&l| l == v).count();
            println!("class {name}: {count} segment(s)");
        }
        println!(
            "mean {:.4} | sample variance {:.4}",
            mean,
            data.series.sample_variance()
        );
        return Ok(());
    }

    let out = args.out.expect("--out required without --preview");
    let mut csv = String::with_capacity(n * 24);
    for &v in data.series.samples() {
        csv.push_str(&json_out::float_token(v));
        csv.push('\n');
    }
    write_file(&out, &csv)?;

    let truth_path = out.with_extension("truth.json");
    let mut truth = Json::obj();
    truth.push("schema_version", Json::UInt(report::SCHEMA_VERSION));
    truth.push("kind", Json::Str("truth".to_string()));
    truth.push("seed", Json::UInt(seed));
    truth.push("n", Json::UInt(n as u64));
    truth.push("tau", Json::uints(&data.tau));
    truth.push("segment_labels", Json::uints(&data.segment_labels));
    truth.push("per_time_labels", Json::uints(&data.per_time_labels));
    truth.push(
        "class_names",
        Json::Arr(
            scenario
                .class_names
                .iter()
                .map(|s| Json::Str(s.clone()))
                .collect(),
        ),
    );
    write_file(&truth_path, &truth.render())?;

    println!("wrote {} ({n} samples)", out.display());
    println!("wrote {}", truth_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let _ = args.seed; // no randomness to seed
    let result = read_json(&args.result)?;
    let truth = read_json(&args.truth)?;
    check_schema_version(&result, "result")?;
    check_schema_version(&truth, "truth")?;

    let n = json_u64(&result, "n", "result")? as usize;
    let truth_n = json_u64(&truth, "n", "truth")? as usize;
    if n != truth_n {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            format!("schema mismatch: result n = {n} but truth n = {truth_n}"),
        ));
    }

    let point = result.get("point_estimate").ok_or_else(|| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            "schema mismatch: result: missing field 'point_estimate'",
        )
    })?;
    let est_tau = json_usize_array(point, "tau", "result point_estimate")?;
    let est_labels = json_usize_array(point, "labels", "result point_estimate")?;
    let truth_tau = json_usize_array(&truth, "tau", "truth")?;
    let truth_classes = json_usize_array(&truth, "per_time_labels", "truth")?;
    if truth_classes.len() != n {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            format!(
                "schema mismatch: truth per_time_labels has {} entries for n = {n}",
                truth_classes.len()
            ),
        ));
    }
    if est_labels.len() != est_tau.len() + 1 {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            format!(
                "schema mismatch: point estimate has {} labels for {} segments",
                est_labels.len(),
                est_tau.len() + 1
            ),
        ));
    }
    let seg = Segmentation::new(n, est_tau.clone()).map_err(|e| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!("schema mismatch: point estimate: {e}"),
        )
    })?;
    let est_classes = per_time_labels(&seg, &ClassAssignment::compacted(&est_labels), n);

    let f1 = cp_f1(&est_tau, &truth_tau, args.window);
    let ari = adjusted_rand_index(&est_classes, &truth_classes);
    println!(
        "cp_f1 window={} precision={:.6} recall={:.6} f1={:.6}",
        args.window, f1.precision, f1.recall, f1.f1
    );
    println!("labels_ari {ari:.6}");

    if let Some(out) = &args.out {
        let mut j = Json::obj();
        j.push("schema_version", Json::UInt(report::SCHEMA_VERSION));
        j.push("window", Json::UInt(args.window as u64));
        j.push("precision", Json::Float(f1.precision));
        j.push("recall", Json::Float(f1.recall));
        j.push("f1", Json::Float(f1.f1));
        j.push("labels_ari", Json::Float(ari));
        write_file(out, &j.render())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle-check

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<(), Failure> {
    let mut lines = Vec::new();
    if matches!(args.suite, SuiteArg::All | SuiteArg::Quadrature) {
        lines.extend(oracle_check::quadrature_suite(args.seed, args.quad_tol));
    }
    if matches!(args.suite, SuiteArg::All | SuiteArg::Enumeration) {
        lines.push(oracle_check::enumeration_suite(
            args.seed,
            args.enum_iters,
            args.tv_threshold,
        ));
    }

    let mut failures = 0usize;
    for line in &lines {
        println!(
            "[{}] {} — {}",
            if line.pass { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
        if !line.pass {
            failures += 1;
            if let Some(instance) = &line.instance {
                eprintln!("{}", instance.render());
            }
        }
    }
    if failures > 0 {
        return Err(Failure::new(
            EXIT_ORACLE_MISMATCH,
            format!("{failures} of {} checks failed", lines.len()),
        ));
    }
    println!("all {} checks passed", lines.len());
    Ok(())
}
