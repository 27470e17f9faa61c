// SPDX-License-Identifier: MIT OR Apache-2.0

//! Configuration files.
//!
//! Two file kinds, both TOML:
//!
//! * **Hyperparameter config** — a flat key/value table mirroring the
//!   [`Hyperparameters`] field names, so experiment configs diff cleanly.
//!   Command-line flags override file values; `omega` accepts a scalar
//!   (meaning that multiple of the identity) or a full row-major matrix.
//! * **Scenario** — a generator plan: named regime classes plus the segment
//!   sequence, used by `simulate`.

use std::collections::BTreeMap;
use std::path::Path;

use dpseg::model::Hyperparameters;
use dpseg::synth::RegimeClass;
use nalgebra::{DMatrix, DVector};
use toml::Value;

use crate::{Failure, EXIT_INVALID_CONFIG, EXIT_IO};

fn read_toml(path: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!("{}: not valid TOML: {e}", path.display()),
        )
    })
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_INVALID_CONFIG, format!("{}: {msg}", path.display()))
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => None,
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => None,
    }
}

fn as_f64_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

/// File-supplied hyperparameter overrides, applied between the defaults and
/// the command-line flags.
#[derive(Debug, Default)]
pub struct FileOverrides {
    pub d_model: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    rest: Vec<(String, Value)>,
}

/// First pass over a config file: pull out `d_model` (the defaults of other
/// fields depend on it), `seed`, and `gamma` (its default depends on the
/// data); keep everything else for [`apply_to`](FileOverrides::apply_to).
pub fn load_hyper_config(path: &Path) -> Result<FileOverrides, Failure> {
    let table = read_toml(path)?;
    let mut out = FileOverrides::default();
    for (key, value) in table {
        match key.as_str() {
            "d_model" => {
                out.d_model = Some(
                    as_usize(&value)
                        .ok_or_else(|| bad(path, "d_model must be a non-negative integer"))?,
                );
            }
            "seed" => {
                out.seed = Some(
                    as_u64(&value)
                        .ok_or_else(|| bad(path, "seed must be a non-negative integer"))?,
                );
            }
            "gamma" => {
                out.gamma =
                    Some(as_f64(&value).ok_or_else(|| bad(path, "gamma must be a number"))?);
            }
            "delta" | "lambda_phi" | "beta" | "omega" | "nu" | "alpha" | "k_max" | "l_min"
            | "n_iter" | "nc_iter" | "m_aux" | "burn_in" | "thin" => {
                out.rest.push((key, value));
            }
            other => {
                return Err(bad(path, format!("unknown config key '{other}'")));
            }
        }
    }
    Ok(out)
}

impl FileOverrides {
    /// Writes the retained fields into `h`. `d_model`, `seed`, and `gamma`
    /// were consumed by the first pass and are handled by the caller.
    pub fn apply_to(&self, h: &mut Hyperparameters, path: &Path) -> Result<(), Failure> {
        for (key, value) in &self.rest {
            match key.as_str() {
                "delta" => {
                    h.delta = as_f64(value).ok_or_else(|| bad(path, "delta must be a number"))?
                }
                "beta" => {
                    h.beta = as_f64(value).ok_or_else(|| bad(path, "beta must be a number"))?
                }
                "nu" => h.nu = as_f64(value).ok_or_else(|| bad(path, "nu must be a number"))?,
                "alpha" => {
                    h.alpha = as_f64(value).ok_or_else(|| bad(path, "alpha must be a number"))?
                }
                "burn_in" => {
                    h.burn_in =
                        as_f64(value).ok_or_else(|| bad(path, "burn_in must be a number"))?
                }
                "k_max" => {
                    h.k_max = as_usize(value)
                        .ok_or_else(|| bad(path, "k_max must be a non-negative integer"))?
                }
                "l_min" => {
                    h.l_min = as_usize(value)
                        .ok_or_else(|| bad(path, "l_min must be a non-negative integer"))?
                }
                "n_iter" => {
                    h.n_iter = as_usize(value)
                        .ok_or_else(|| bad(path, "n_iter must be a non-negative integer"))?
                }
                "nc_iter" => {
                    h.nc_iter = as_usize(value)
                        .ok_or_else(|| bad(path, "nc_iter must be a non-negative integer"))?
                }
                "m_aux" => {
                    h.m_aux = as_usize(value)
                        .ok_or_else(|| bad(path, "m_aux must be a non-negative integer"))?
                }
                "thin" => {
                    h.thin = as_usize(value)
                        .ok_or_else(|| bad(path, "thin must be a non-negative integer"))?
                }
                "lambda_phi" => {
                    let v = as_f64_vec(value)
                        .ok_or_else(|| bad(path, "lambda_phi must be an array of numbers"))?;
                    if v.len() != h.d_model {
                        return Err(bad(
                            path,
                            format!(
                                "lambda_phi has {} entries, expected d_model = {}",
                                v.len(),
                                h.d_model
                            ),
                        ));
                    }
                    h.lambda_phi = DVector::from_vec(v);
                }
                "omega" => h.omega = parse_omega(value, h.d_model, path)?,
                _ => unreachable!("key list fixed by load_hyper_config"),
            }
        }
        Ok(())
    }
}

/// `omega = s` means `s · I`; `omega = [[..], ..]` is a full square matrix.
fn parse_omega(value: &Value, d: usize, path: &Path) -> Result<DMatrix<f64>, Failure> {
    if let Some(s) = as_f64(value) {
        return Ok(DMatrix::identity(d, d) * s);
    }
    let rows = value
        .as_array()
        .ok_or_else(|| bad(path, "omega must be a number or an array of rows"))?;
    if rows.len() != d {
        return Err(bad(
            path,
            format!("omega has {} rows, expected {d}", rows.len()),
        ));
    }
    let mut m = DMatrix::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        let row = as_f64_vec(row)
            .filter(|r| r.len() == d)
            .ok_or_else(|| bad(path, format!("omega row {i} must have {d} numbers")))?;
        for (j, x) in row.into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

/// A generator plan: named classes and the segment sequence.
#[derive(Debug)]
pub struct Scenario {
    pub seed: u64,
    /// Class names in sorted order; indices into `classes` are the canonical
    /// ground-truth labels.
    pub class_names: Vec<String>,
    pub classes: Vec<RegimeClass>,
    pub plan_labels: Vec<usize>,
    pub plan_lengths: Vec<usize>,
}

/// Parses a scenario file:
///
/// ```toml
/// seed = 42
/// plan_classes = ["A", "B", "A"]
/// plan_lengths = [200, 200, 200]
///
/// [classes.A]
/// phi = [0.0, 0.9]      # intercept, then lag coefficients
/// noise_var = 1.0
///
/// [classes.B]
/// phi = [0.0, -0.5]
/// noise_var = 1.0
/// ```
///
/// An unstable class definition is rejected with the class named.
pub fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let table = read_toml(path)?;
    for key in table.keys() {
        if !matches!(
            key.as_str(),
            "seed" | "classes" | "plan_classes" | "plan_lengths"
        ) {
            return Err(bad(path, format!("unknown scenario key '{key}'")));
        }
    }

    let seed = match table.get("seed") {
        Some(v) => as_u64(v).ok_or_else(|| bad(path, "seed must be a non-negative integer"))?,
        None => 0,
    };

    let class_table = table
        .get("classes")
        .and_then(Value::as_table)
        .ok_or_else(|| bad(path, "missing [classes.<name>] tables"))?;
    // Sorted names make ground-truth label indices independent of file order.
    let by_name: BTreeMap<&str, &Value> =
        class_table.iter().map(|(k, v)| (k.as_str(), v)).collect();
    let mut class_names = Vec::new();
    let mut classes = Vec::new();
    for (name, spec) in by_name {
        let spec = spec
            .as_table()
            .ok_or_else(|| bad(path, format!("class '{name}' must be a table")))?;
        for key in spec.keys() {
            if !matches!(key.as_str(), "phi" | "noise_var") {
                return Err(bad(path, format!("class '{name}': unknown key '{key}'")));
            }
        }
        let phi = spec.get("phi").and_then(as_f64_vec).ok_or_else(|| {
            bad(
                path,
                format!("class '{name}': phi must be an array of numbers"),
            )
        })?;
        let noise_var = spec
            .get("noise_var")
            .and_then(as_f64)
            .ok_or_else(|| bad(path, format!("class '{name}': noise_var must be a number")))?;
        let class = RegimeClass::new(phi, noise_var)
            .map_err(|e| bad(path, format!("class '{name}': {e}")))?;
        class_names.push(name.to_string());
        classes.push(class);
    }

    let plan_classes = table
        .get("plan_classes")
        .and_then(Value::as_array)
        .ok_or_else(|| bad(path, "plan_classes must be an array of class names"))?;
    let plan_labels = plan_classes
        .iter()
        .map(|v| {
            let name = v
                .as_str()
                .ok_or_else(|| bad(path, "plan_classes entries must be strings"))?;
            class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| bad(path, format!("plan references unknown class '{name}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let plan_lengths = table
        .get("plan_lengths")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .map(|v| as_usize(v).filter(|&len| len > 0))
                .collect::<Option<Vec<_>>>()
        })
        .ok_or_else(|| bad(path, "plan_lengths must be an array"))?
        .ok_or_else(|| bad(path, "plan_lengths entries must be positive integers"))?;

    if plan_labels.is_empty() || plan_labels.len() != plan_lengths.len() {
        return Err(bad(
            path,
            "plan_classes and plan_lengths must be non-empty and the same length",
        ));
    }

    Ok(Scenario {
        seed,
        class_names,
        classes,
        plan_labels,
        plan_lengths,
    })
}
