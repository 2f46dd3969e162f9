//! Cartesian hyperparameter sweeps.
//!
//! A grid document maps dotted config keys to arrays of candidate values:
//!
//! ```toml
//! "algorithm.inner.lr" = [0.01, 0.03, 0.1]
//! topology.local_steps = [1, 5]
//! ```

use std::path::Path;

use rayon::prelude::*;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::config::{ConfigError, ExperimentConfig};
use crate::harness::metrics::{MetricsRecord, CSV_HEADER};
use crate::harness::run::run_experiment;

pub const DEFAULT_MAX_RUNS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<(String, Vec<Value>)>,
}

impl Grid {
    pub fn new(axes: Vec<(String, Vec<Value>)>) -> Self {
        Self { axes }
    }

    pub fn axes(&self) -> &[(String, Vec<Value>)] {
        &self.axes
    }

    /// Number of assignments in the product.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Assignment `index` in row-major order (last axis fastest).
    pub fn assignment(&self, mut index: usize) -> Vec<(String, Value)> {
        let mut out = vec![(String::new(), Value::Boolean(false)); self.axes.len()];
        for (k, (key, values)) in self.axes.iter().enumerate().rev() {
            out[k] = (key.clone(), values[index % values.len()].clone());
            index /= values.len();
        }
        out
    }
}

pub fn parse_grid(text: &str) -> Result<Grid, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![format!("grid syntax: {}", e.message())],
    })?;
    let mut axes = Vec::new();
    let mut errors = Vec::new();
    collect_axes(&table, "", &mut axes, &mut errors);
    if axes.is_empty() && errors.is_empty() {
        errors.push("grid has no axes".into());
    }
    if errors.is_empty() {
        Ok(Grid { axes })
    } else {
        Err(ConfigError { violations: errors })
    }
}

fn collect_axes(table: &Table, prefix: &str, axes: &mut Vec<(String, Vec<Value>)>, errors: &mut Vec<String>) {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            Value::Array(values) if values.is_empty() => errors.push(format!("{path}: empty value list")),
            Value::Array(values) => axes.push((path, values.clone())),
            Value::Table(sub) => collect_axes(sub, &path, axes, errors),
            _ => errors.push(format!("{path}: grid values must be arrays")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub seed: u64,
    pub assignment: Vec<(String, Value)>,
    pub last: MetricsRecord,
}

/// Runs every assignment of `grid` over `base`. Assignment `k` runs with seed
/// `base.seed + k`; rows come back sorted by final objective gap (diverged
/// runs last), ties by index. All assignments are validated before any run.
pub fn sweep(base: &ExperimentConfig, grid: &Grid, max_runs: usize) -> Result<Vec<SweepRow>> {
    let size = grid.size();
    if size > max_runs {
        return Err(ConfigError {
            violations: vec![format!("grid has {size} assignments, the cap is {max_runs}")],
        }
        .into());
    }
    let mut configs = Vec::with_capacity(size);
    let mut violations = Vec::new();
    for index in 0..size {
        let assignment = grid.assignment(index);
        let seed = base.seed.wrapping_add(index as u64);
        let mut overrides = assignment.clone();
        overrides.push(("seed".into(), Value::Integer(seed as i64)));
        match base.with_overrides(&overrides) {
            Ok(cfg) => configs.push((index, seed, assignment, cfg)),
            Err(e) => {
                for v in e.violations {
                    if !violations.contains(&v) {
                        violations.push(v);
                    }
                }
            }
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError { violations }.into());
    }
    let mut rows = configs
        .into_par_iter()
        .map(|(index, seed, assignment, cfg)| {
            let records = run_experiment(&cfg)?;
            let last = *records.last().expect("at least one round is recorded");
            Ok(SweepRow {
                index,
                seed,
                assignment,
                last,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let key = |r: &SweepRow| {
        let g = r.last.objective_gap;
        if r.last.diverged || !g.is_finite() {
            f64::INFINITY
        } else {
            g
        }
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index)));
    Ok(rows)
}

/// One line per row: index, seed, the assigned values, then the final record.
pub fn write_sweep_csv(grid: &Grid, rows: &[SweepRow], path: &Path) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["index".to_string(), "seed".to_string()];
    header.extend(grid.axes().iter().map(|(key, _)| key.clone()));
    header.extend(CSV_HEADER[..7].iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut record = vec![r.index.to_string(), r.seed.to_string()];
        record.extend(r.assignment.iter().map(|(_, v)| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }));
        let l = &r.last;
        record.push(l.round.to_string());
        record.extend(
            [
                l.objective_gap,
                l.dist_to_truth,
                l.grad_norm_sq,
                l.running_min_grad_sq,
                l.delta_inf_norm,
            ]
            .iter()
            .map(|v| format!("{v:.16e}")),
        );
        record.push(l.diverged.to_string());
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
