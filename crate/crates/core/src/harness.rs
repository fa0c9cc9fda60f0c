//! Multi-trial experiments, dimension scans, convergence curves, tuning and
//! result export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::make_benchmark_by_name;
use crate::optimizers::{self, RunConfig, RunRecord};
use crate::sparse::PathRecord;

/// One benchmark experiment: every method runs `trials` times on
/// `objective` in dimension `dim`.
///
/// `budget`, `success_threshold` and `master_seed` override the
/// corresponding fields of every method config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub objective: String,
    pub dim: usize,
    pub methods: Vec<RunConfig>,
    pub trials: u64,
    pub budget: u64,
    pub success_threshold: f64,
    pub master_seed: u64,
    /// Drop errored trials from the success-rate denominator.
    pub strict_errors: bool,
    /// Evaluation counts at which best-f quantiles are reported.
    pub checkpoints: Vec<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "success_threshold must be positive, got {}",
                self.success_threshold
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if let Some(c) = self.checkpoints.iter().find(|c| **c > self.budget) {
            return Err(Error::InvalidConfig(format!("checkpoint {c} exceeds budget {}", self.budget)));
        }
        for m in &self.methods {
            self.resolve(m).validate()?;
        }
        Ok(())
    }

    /// Method config with the experiment-wide fields applied.
    pub fn resolve(&self, method: &RunConfig) -> RunConfig {
        RunConfig {
            budget: self.budget,
            success_threshold: self.success_threshold,
            seed: self.master_seed,
            ..method.clone()
        }
    }
}

/// Result of one trial. Errors are kept apart from unsuccessful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Completed(RunRecord),
    Failed(String),
}

impl TrialOutcome {
    pub fn record(&self) -> Option<&RunRecord> {
        match self {
            TrialOutcome::Completed(r) => Some(r),
            TrialOutcome::Failed(_) => None,
        }
    }
}

/// Best-f quantiles across trials at fixed evaluation counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub method: String,
    pub checkpoints: Vec<u64>,
    /// `None` where no trial had completed an iteration yet.
    pub median: Vec<Option<f64>>,
    pub q25: Vec<Option<f64>>,
    pub q75: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    pub config: RunConfig,
    pub trials: u64,
    pub successes: u64,
    pub errors: u64,
    pub success_rate: f64,
    /// Mean evaluations to success over successful trials; `None` renders as `N`.
    pub mean_evals_success: Option<f64>,
    /// Mean over all completed trials, using total evaluations for failures.
    pub mean_evals_all: Option<f64>,
    pub count_success_checks: bool,
    pub curve: Option<Curve>,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub objective: String,
    pub dim: usize,
    pub methods: Vec<MethodStats>,
}

/// Aggregates stored outcomes. `strict_errors` drops errored trials from
/// the denominator.
pub fn aggregate(
    label: String,
    config: RunConfig,
    outcomes: Vec<TrialOutcome>,
    strict_errors: bool,
    checkpoints: &[u64],
) -> MethodStats {
    let errors = outcomes.iter().filter(|o| o.record().is_none()).count() as u64;
    let records: Vec<&RunRecord> = outcomes.iter().filter_map(TrialOutcome::record).collect();
    let successes: Vec<u64> = records.iter().filter_map(|r| r.evals_at_success).collect();
    let denominator = if strict_errors {
        records.len() as u64
    } else {
        outcomes.len() as u64
    };
    let success_rate = if denominator == 0 {
        0.0
    } else {
        successes.len() as f64 / denominator as f64
    };
    let mean = |v: &[u64]| (!v.is_empty()).then(|| v.iter().map(|&e| e as f64).sum::<f64>() / v.len() as f64);
    let all: Vec<u64> = records
        .iter()
        .map(|r| r.evals_at_success.unwrap_or(r.evals_used))
        .collect();
    let curve = (!checkpoints.is_empty()).then(|| curve_from_records(&label, &records, checkpoints));
    MethodStats {
        method: label,
        count_success_checks: config.count_success_checks,
        config,
        trials: outcomes.len() as u64,
        successes: successes.len() as u64,
        errors,
        success_rate,
        mean_evals_success: mean(&successes),
        mean_evals_all: mean(&all),
        curve,
        outcomes,
    }
}

/// Runs all trials of all methods. Trials run in parallel; each trial's
/// streams depend only on `(master_seed, trial)`, so results do not depend
/// on the worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateStats> {
    spec.validate()?;
    let obj = make_benchmark_by_name(&spec.objective, spec.dim)?;
    let methods = spec
        .methods
        .iter()
        .map(|m| {
            let cfg = spec.resolve(m);
            let outcomes: Vec<TrialOutcome> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| match optimizers::run(&obj, &cfg, trial) {
                    Ok(r) => TrialOutcome::Completed(r),
                    Err(e) => TrialOutcome::Failed(e.to_string()),
                })
                .collect();
            aggregate(cfg.label(), cfg, outcomes, spec.strict_errors, &spec.checkpoints)
        })
        .collect();
    Ok(AggregateStats {
        objective: spec.objective.clone(),
        dim: spec.dim,
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimRow {
    pub objective: String,
    pub dim: usize,
    pub method: String,
    pub trials: u64,
    pub success_rate: f64,
    pub mean_evals_success: Option<f64>,
}

/// Success rate per `(dim, method)` under the spec's fixed budget.
pub fn success_vs_dimension(spec: &ExperimentSpec, dims: &[usize]) -> Result<Vec<DimRow>> {
    let mut rows = Vec::new();
    for &dim in dims {
        let stats = run_experiment(&ExperimentSpec { dim, ..spec.clone() })?;
        rows.extend(stats.methods.into_iter().map(|m| DimRow {
            objective: spec.objective.clone(),
            dim,
            method: m.method,
            trials: m.trials,
            success_rate: m.success_rate,
            mean_evals_success: m.mean_evals_success,
        }));
    }
    Ok(rows)
}

/// Best f seen by evaluation count `at`: the last trace value with
/// `evals_used <= at`, or `None` before the first iteration finished.
pub fn best_f_at(record: &RunRecord, at: u64) -> Option<f64> {
    let idx = record.trace.partition_point(|p| p.evals_used <= at);
    (idx > 0).then(|| record.trace[idx - 1].best_f)
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn curve_from_records(label: &str, records: &[&RunRecord], checkpoints: &[u64]) -> Curve {
    let mut curve = Curve {
        method: label.to_string(),
        checkpoints: checkpoints.to_vec(),
        median: Vec::new(),
        q25: Vec::new(),
        q75: Vec::new(),
    };
    for &c in checkpoints {
        let mut vals: Vec<f64> = records.iter().filter_map(|r| best_f_at(r, c)).collect();
        vals.sort_by(f64::total_cmp);
        let at = |q| (!vals.is_empty()).then(|| quantile(&vals, q));
        curve.median.push(at(0.5));
        curve.q25.push(at(0.25));
        curve.q75.push(at(0.75));
    }
    curve
}

/// Median and interquartile range of best f at each checkpoint, with early
/// stopping disabled so every trace runs to the budget.
pub fn convergence_curves(spec: &ExperimentSpec, checkpoints: &[u64]) -> Result<Vec<Curve>> {
    let spec = ExperimentSpec {
        methods: spec
            .methods
            .iter()
            .map(|m| RunConfig {
                early_stop: false,
                ..m.clone()
            })
            .collect(),
        checkpoints: checkpoints.to_vec(),
        ..spec.clone()
    };
    let stats = run_experiment(&spec)?;
    Ok(stats.methods.into_iter().filter_map(|m| m.curve).collect())
}

/// Factorial grid over step size and homotopy length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSpec {
    pub eta0: Vec<f64>,
    pub homotopy_steps: Vec<u64>,
    pub trials: u64,
    pub budget: u64,
    /// Kept apart from the experiment seed so tuning never sees the
    /// evaluation trials.
    pub seed: u64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            eta0: vec![0.1, 0.3, 1.0, 3.0],
            homotopy_steps: vec![50, 100, 200],
            trials: 5,
            budget: 200_000,
            seed: 1_000_003,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub eta0: f64,
    pub homotopy_steps: u64,
    pub success_rate: f64,
    pub mean_evals_success: Option<f64>,
    pub mean_evals_all: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub objective: String,
    pub dim: usize,
    pub rows: Vec<TuneRow>,
    pub best: RunConfig,
}

/// Picks the grid point with the highest success rate, then the lowest
/// all-runs mean evaluation count; earlier grid points win ties.
pub fn tune(base: &ExperimentSpec, method: &RunConfig, grid: &TuneSpec) -> Result<TuneReport> {
    if grid.eta0.is_empty() || grid.homotopy_steps.is_empty() {
        return Err(Error::InvalidConfig("tuning grid must be non-empty".into()));
    }
    let mut rows = Vec::new();
    let mut best: Option<(usize, RunConfig)> = None;
    for &homotopy_steps in &grid.homotopy_steps {
        for &eta0 in &grid.eta0 {
            let cfg = RunConfig {
                eta0,
                homotopy_steps,
                ..method.clone()
            };
            let spec = ExperimentSpec {
                methods: vec![cfg.clone()],
                trials: grid.trials,
                budget: grid.budget,
                master_seed: grid.seed,
                checkpoints: Vec::new(),
                ..base.clone()
            };
            let m = run_experiment(&spec)?.methods.remove(0);
            let row = TuneRow {
                eta0,
                homotopy_steps,
                success_rate: m.success_rate,
                mean_evals_success: m.mean_evals_success,
                mean_evals_all: m.mean_evals_all,
            };
            let better = match &best {
                None => true,
                Some((i, _)) => {
                    let b: &TuneRow = &rows[*i];
                    row.success_rate > b.success_rate
                        || (row.success_rate == b.success_rate
                            && row.mean_evals_all.unwrap_or(f64::INFINITY)
                                < b.mean_evals_all.unwrap_or(f64::INFINITY))
                }
            };
            if better {
                best = Some((rows.len(), cfg));
            }
            rows.push(row);
        }
    }
    Ok(TuneReport {
        objective: base.objective.clone(),
        dim: base.dim,
        rows,
        best: best.expect("grid is non-empty").1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// Anything the harness can write as a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Results<'a> {
    Stats(&'a [AggregateStats]),
    Dims(&'a [DimRow]),
    Curves(&'a [Curve]),
    Path(&'a [PathRecord]),
    Tune(&'a TuneReport),
}

pub const TOOL_VERSION: &str = concat!("pgho ", env!("CARGO_PKG_VERSION"));

/// Twelve significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N".to_string(), fmt_float)
}

impl Results<'_> {
    pub fn csv_header(&self) -> &'static [&'static str] {
        match self {
            Results::Stats(_) => &[
                "objective",
                "dim",
                "method",
                "trials",
                "successes",
                "errors",
                "success_rate",
                "mean_evals_success",
                "mean_evals_all",
                "count_success_checks",
            ],
            Results::Dims(_) => &["objective", "dim", "method", "trials", "success_rate", "mean_evals_success"],
            Results::Curves(_) => &["method", "evals", "median", "q25", "q75"],
            Results::Path(_) => &["lambda", "method", "misfit", "surrogate", "objective", "support_jaccard", "seed"],
            Results::Tune(_) => &["eta0", "homotopy_steps", "success_rate", "mean_evals_success", "mean_evals_all"],
        }
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        match self {
            Results::Stats(stats) => stats
                .iter()
                .flat_map(|s| {
                    s.methods.iter().map(move |m| {
                        vec![
                            s.objective.clone(),
                            s.dim.to_string(),
                            m.method.clone(),
                            m.trials.to_string(),
                            m.successes.to_string(),
                            m.errors.to_string(),
                            fmt_float(m.success_rate),
                            fmt_opt(m.mean_evals_success),
                            fmt_opt(m.mean_evals_all),
                            m.count_success_checks.to_string(),
                        ]
                    })
                })
                .collect(),
            Results::Dims(rows) => rows
                .iter()
                .map(|r| {
                    vec![
                        r.objective.clone(),
                        r.dim.to_string(),
                        r.method.clone(),
                        r.trials.to_string(),
                        fmt_float(r.success_rate),
                        fmt_opt(r.mean_evals_success),
                    ]
                })
                .collect(),
            Results::Curves(curves) => curves
                .iter()
                .flat_map(|c| {
                    (0..c.checkpoints.len()).map(move |i| {
                        vec![
                            c.method.clone(),
                            c.checkpoints[i].to_string(),
                            fmt_opt(c.median[i]),
                            fmt_opt(c.q25[i]),
                            fmt_opt(c.q75[i]),
                        ]
                    })
                })
                .collect(),
            Results::Path(records) => records
                .iter()
                .flat_map(|r| &r.entries)
                .map(|e| {
                    vec![
                        fmt_float(e.lambda),
                        e.method.clone(),
                        fmt_float(e.misfit),
                        fmt_float(e.surrogate),
                        fmt_float(e.objective),
                        fmt_float(e.support_jaccard),
                        e.seed.to_string(),
                    ]
                })
                .collect(),
            Results::Tune(report) => report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_float(r.eta0),
                        r.homotopy_steps.to_string(),
                        fmt_float(r.success_rate),
                        fmt_opt(r.mean_evals_success),
                        fmt_opt(r.mean_evals_all),
                    ]
                })
                .collect(),
        }
    }
}

/// Renders results as CSV (with `#` metadata lines) or JSON. `spec` is
/// embedded verbatim in the metadata.
pub fn render_results<S: Serialize>(results: &Results<'_>, spec: &S, format: Format) -> Result<String> {
    let spec_json = serde_json::to_string(spec)?;
    match format {
        Format::Csv => {
            let mut out = String::new();
            writeln!(out, "# tool: {TOOL_VERSION}").unwrap();
            writeln!(out, "# spec: {spec_json}").unwrap();
            writeln!(out, "{}", results.csv_header().join(",")).unwrap();
            for row in results.csv_rows() {
                writeln!(out, "{}", row.join(",")).unwrap();
            }
            Ok(out)
        }
        Format::Json => {
            let doc = serde_json::json!({
                "tool": TOOL_VERSION,
                "spec": serde_json::from_str::<serde_json::Value>(&spec_json)?,
                "results": results,
            });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn export_results<S: Serialize>(results: &Results<'_>, spec: &S, path: &Path, format: Format) -> Result<()> {
    fs::write(path, render_results(results, spec, format)?)?;
    Ok(())
}
