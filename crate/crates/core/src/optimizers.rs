//! Update rules, step-size and homotopy schedules, and the run drivers.
//!
//! Every driver shares one loop: per iteration each particle gets a search
//! direction, takes a step, and is projected back into the box; then the true
//! objective is evaluated at every particle (the success check), the running
//! best is updated, and a trace point is recorded.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{EvalCounter, Objective};
use crate::rng::{StreamKey, INIT_SLOT};
use crate::smoothing::{classical_gh_gradient, softmin_gradient_at, NoiseBatch, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pgho,
    Gh,
    Gd,
    Adam,
    Prs,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pgho => "pgho",
            Method::Gh => "gh",
            Method::Gd => "gd",
            Method::Adam => "adam",
            Method::Prs => "prs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TSchedule {
    Linear,
    SqrtFromTmin,
}

/// Where particles start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniform in the objective's box.
    Box,
    /// Standard normal, then projected into the box.
    Normal,
    Zero,
    Point(Vec<f64>),
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: Method,
    /// Inner update for `pgho` and `gh`; `gd`/`adam` methods imply their own.
    pub update: UpdateKind,
    /// Homotopy steps `T`; `t` reaches 1 at iteration `T - 1`.
    pub homotopy_steps: u64,
    /// Particle count `B`.
    pub particles: usize,
    /// Monte Carlo samples `K` per gradient estimate.
    pub samples: usize,
    pub eta0: f64,
    /// Floor of the cosine schedule, also the step size after the homotopy phase.
    pub eta_min: f64,
    pub lr_schedule: LrSchedule,
    pub t_schedule: TSchedule,
    pub t_min: f64,
    pub schedule: Schedule,
    pub antithetic: bool,
    pub budget: u64,
    pub success_threshold: f64,
    pub early_stop: bool,
    pub count_success_checks: bool,
    pub max_iters: Option<u64>,
    pub seed: u64,
    pub init: Init,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Pgho,
            update: UpdateKind::Gd,
            homotopy_steps: 200,
            particles: 1,
            samples: 4,
            eta0: 1.0,
            eta_min: 0.0,
            lr_schedule: LrSchedule::Cosine,
            t_schedule: TSchedule::Linear,
            t_min: 0.0,
            schedule: Schedule::default(),
            antithetic: true,
            budget: 200_000,
            success_threshold: 5e-2,
            early_stop: true,
            count_success_checks: true,
            max_iters: None,
            seed: 0,
            init: Init::Box,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.homotopy_steps < 2 {
            return fail(format!("homotopy_steps must be at least 2, got {}", self.homotopy_steps));
        }
        if self.particles == 0 {
            return fail("particles must be at least 1".into());
        }
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        if self.budget < self.samples as u64 {
            return fail(format!("budget {} is below samples {}", self.budget, self.samples));
        }
        if !(0.0..1.0).contains(&self.t_min) {
            return fail(format!("t_min must lie in [0, 1), got {}", self.t_min));
        }
        if !(self.eta0 >= 0.0 && self.eta_min >= 0.0 && self.eta0.is_finite()) {
            return fail(format!("step sizes must be non-negative, got eta0 {} eta_min {}", self.eta0, self.eta_min));
        }
        if self.max_iters == Some(0) {
            return fail("max_iters must be positive when set".into());
        }
        self.schedule.validate()
    }

    /// Short method name, e.g. `pgh-gd` or `adam`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Pgho | Method::Gh => {
                let prefix = if self.method == Method::Pgho { "pgh" } else { "gh" };
                let rule = match self.update {
                    UpdateKind::Gd => "gd",
                    UpdateKind::Adam => "adam",
                };
                format!("{prefix}-{rule}")
            }
            other => other.as_str().to_string(),
        }
    }

    /// Update rule applied by this configuration's driver.
    pub fn update_kind(&self) -> UpdateKind {
        match self.method {
            Method::Adam => UpdateKind::Adam,
            Method::Gd => UpdateKind::Gd,
            _ => self.update,
        }
    }

    /// Evaluations charged per iteration.
    pub fn iteration_cost(&self) -> u64 {
        let per_particle_grad = match self.method {
            Method::Pgho | Method::Gh => self.samples as u64,
            Method::Gd | Method::Adam => 1,
            Method::Prs => return self.particles as u64,
        };
        let check = u64::from(self.count_success_checks);
        self.particles as u64 * (per_particle_grad + check)
    }
}

/// Step size at iteration `k`.
pub fn lr_at(cfg: &RunConfig, k: u64) -> f64 {
    match cfg.lr_schedule {
        LrSchedule::Constant => cfg.eta0,
        LrSchedule::Cosine => {
            let last = (cfg.homotopy_steps - 1) as f64;
            let progress = k.min(cfg.homotopy_steps - 1) as f64 / last;
            cfg.eta_min + (cfg.eta0 - cfg.eta_min) * 0.5 * (1.0 + (PI * progress).cos())
        }
    }
}

/// Homotopy parameter at iteration `k`; pinned to 1 once `k >= T - 1`.
pub fn t_at(cfg: &RunConfig, k: u64) -> f64 {
    let progress = (k as f64 / (cfg.homotopy_steps - 1) as f64).min(1.0);
    match cfg.t_schedule {
        TSchedule::Linear => progress,
        TSchedule::SqrtFromTmin => {
            if progress >= 1.0 {
                1.0
            } else {
                cfg.t_min + (1.0 - cfg.t_min) * progress.sqrt()
            }
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam moments for one particle.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateRule {
    Gd,
    Adam(AdamState),
}

impl UpdateRule {
    pub fn new(kind: UpdateKind, dim: usize) -> Self {
        match kind {
            UpdateKind::Gd => UpdateRule::Gd,
            UpdateKind::Adam => UpdateRule::Adam(AdamState {
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                step: 0,
            }),
        }
    }

    /// Moves `x` in place by one step of size `eta` along `-g`.
    pub fn apply(&mut self, x: &mut [f64], g: &[f64], eta: f64) -> Result<()> {
        if x.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: g.len(),
            });
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index, value: g[index] });
        }
        match self {
            UpdateRule::Gd => {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= eta * gi;
                }
            }
            UpdateRule::Adam(state) => {
                if state.m.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: state.m.len(),
                        got: x.len(),
                    });
                }
                state.step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
                for i in 0..x.len() {
                    state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g[i];
                    state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    let m_hat = state.m[i] / c1;
                    let v_hat = state.v[i] / c2;
                    x[i] -= eta * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`UpdateRule::apply`].
pub fn apply_update(rule: &mut UpdateRule, x: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
    let mut next = x.to_vec();
    rule.apply(&mut next, g, eta)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub t: f64,
    pub best_f: f64,
    pub evals_used: u64,
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub trace: Vec<TracePoint>,
    pub final_particles: Vec<Vec<f64>>,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub success: bool,
    pub evals_at_success: Option<u64>,
    pub evals_used: u64,
    pub iterations: u64,
}

fn require_method(cfg: &RunConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&cfg.method) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "driver expects method in {:?}, got {:?}",
            allowed, cfg.method
        )))
    }
}

fn initial_particles(obj: &dyn Objective, cfg: &RunConfig, key: StreamKey) -> Result<Vec<Vec<f64>>> {
    let bounds = obj.bounds();
    (0..cfg.particles)
        .map(|i| {
            let mut rng = key.particle(i as u64).slot(INIT_SLOT).rng();
            let mut x = match &cfg.init {
                Init::Box => bounds.sample_uniform(&mut rng),
                Init::Normal => (0..obj.dim()).map(|_| StandardNormal.sample(&mut rng)).collect(),
                Init::Zero => vec![0.0; obj.dim()],
                Init::Point(p) => {
                    if p.len() != obj.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: obj.dim(),
                            got: p.len(),
                        });
                    }
                    p.clone()
                }
            };
            bounds.clamp(&mut x);
            Ok(x)
        })
        .collect()
}

/// Search direction for particle `particle` at iteration `k`.
type Direction<'a> = dyn FnMut(usize, u64, f64, &[f64], &mut EvalCounter) -> Result<Vec<f64>> + 'a;

struct Tracker {
    best_f: f64,
    best_x: Vec<f64>,
    trace: Vec<TracePoint>,
    evals_at_success: Option<u64>,
    threshold: f64,
}

impl Tracker {
    fn new(dim: usize, threshold: f64) -> Self {
        Self {
            best_f: f64::INFINITY,
            best_x: vec![0.0; dim],
            trace: Vec::new(),
            evals_at_success: None,
            threshold,
        }
    }

    /// Strict improvement only: the first point reaching a value keeps it.
    fn offer(&mut self, x: &[f64], f: f64) -> bool {
        if f < self.best_f {
            self.best_f = f;
            self.best_x.copy_from_slice(x);
            true
        } else {
            false
        }
    }

    fn close_iteration(&mut self, iteration: u64, t: f64, evals: u64, record: bool) {
        if record {
            self.trace.push(TracePoint {
                iteration,
                t,
                best_f: self.best_f,
                evals_used: evals,
            });
        }
        if self.evals_at_success.is_none() && self.best_f < self.threshold {
            self.evals_at_success = Some(evals);
        }
    }

    fn finish(self, method: Method, particles: Vec<Vec<f64>>, evals: u64, iterations: u64) -> RunRecord {
        RunRecord {
            method,
            success: self.evals_at_success.is_some(),
            evals_at_success: self.evals_at_success,
            trace: self.trace,
            final_particles: particles,
            best_x: self.best_x,
            best_f: self.best_f,
            evals_used: evals,
            iterations,
        }
    }
}

fn descent_loop(obj: &dyn Objective, cfg: &RunConfig, key: StreamKey, direction: &mut Direction<'_>) -> Result<RunRecord> {
    cfg.validate()?;
    let cost = cfg.iteration_cost();
    if cost > cfg.budget {
        return Err(Error::BudgetTooSmall { budget: cfg.budget, cost });
    }
    let mut particles = initial_particles(obj, cfg, key)?;
    let mut rules: Vec<UpdateRule> = (0..cfg.particles)
        .map(|_| UpdateRule::new(cfg.update_kind(), obj.dim()))
        .collect();
    let mut counter = EvalCounter::new();
    let mut tracker = Tracker::new(obj.dim(), cfg.success_threshold);
    let max_iters = cfg.max_iters.unwrap_or(u64::MAX);
    let mut k = 0;
    while k < max_iters && counter.count() + cost <= cfg.budget {
        let t = t_at(cfg, k);
        let eta = lr_at(cfg, k);
        for (i, (x, rule)) in particles.iter_mut().zip(rules.iter_mut()).enumerate() {
            let g = direction(i, k, t, x, &mut counter)?;
            rule.apply(x, &g, eta)?;
            obj.bounds().clamp(x);
        }
        for x in &particles {
            let f = obj.value(x);
            if cfg.count_success_checks {
                counter.add(1);
            }
            tracker.offer(x, f);
        }
        tracker.close_iteration(k, t, counter.count(), true);
        k += 1;
        if cfg.early_stop && tracker.evals_at_success.is_some() {
            break;
        }
    }
    Ok(tracker.finish(cfg.method, particles, counter.count(), k))
}

/// Search direction used by the homotopy drivers: the Boltzmann-weighted
/// estimate for `pgho`, the uniform average for `gh`.
pub fn homotopy_direction(
    obj: &dyn Objective,
    cfg: &RunConfig,
    key: StreamKey,
    particle: usize,
    k: u64,
    t: f64,
    x: &[f64],
    counter: &mut EvalCounter,
) -> Result<Vec<f64>> {
    let mut rng = key.particle(particle as u64).slot(k).rng();
    let noise = NoiseBatch::sample(&mut rng, cfg.samples, obj.dim(), cfg.antithetic);
    let point = cfg.schedule.eval(t)?;
    match cfg.method {
        Method::Gh => Ok(classical_gh_gradient(obj, x, point.beta, &noise, counter)?.1),
        _ => Ok(softmin_gradient_at(obj, x, &point, &noise, counter)?.grad),
    }
}

/// Soft-min homotopy optimization.
pub fn pgho_run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    require_method(cfg, &[Method::Pgho])?;
    homotopy_run(obj, cfg, trial)
}

/// Classical Gaussian homotopy with `sigma(t) = beta(t)`.
pub fn gh_run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    require_method(cfg, &[Method::Gh])?;
    homotopy_run(obj, cfg, trial)
}

fn homotopy_run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    let key = StreamKey::new(cfg.seed, trial);
    descent_loop(obj, cfg, key, &mut |i, k, t, x, counter| {
        homotopy_direction(obj, cfg, key, i, k, t, x, counter)
    })
}

/// Plain GD or Adam on `f`.
pub fn baseline_run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    require_method(cfg, &[Method::Gd, Method::Adam])?;
    let key = StreamKey::new(cfg.seed, trial);
    let mut g = vec![0.0; obj.dim()];
    descent_loop(obj, cfg, key, &mut |_, _, _, x, counter| {
        obj.gradient(x, &mut g);
        counter.add(1);
        Ok(g.clone())
    })
}

/// Pure random search: uniform samples in the box, one evaluation each.
///
/// The trace records only iterations that improve the running best, plus the
/// final iteration, since a full trace would hold one point per sample.
pub fn prs_run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    require_method(cfg, &[Method::Prs])?;
    cfg.validate()?;
    let key = StreamKey::new(cfg.seed, trial);
    let cost = cfg.iteration_cost();
    if cost > cfg.budget {
        return Err(Error::BudgetTooSmall { budget: cfg.budget, cost });
    }
    let mut rngs: Vec<_> = (0..cfg.particles).map(|i| key.particle(i as u64).rng()).collect();
    let mut counter = EvalCounter::new();
    let mut tracker = Tracker::new(obj.dim(), cfg.success_threshold);
    let mut last = vec![Vec::new(); cfg.particles];
    let max_iters = cfg.max_iters.unwrap_or(u64::MAX);
    let mut k = 0;
    while k < max_iters && counter.count() + cost <= cfg.budget {
        let mut improved = false;
        for (rng, slot) in rngs.iter_mut().zip(last.iter_mut()) {
            let x = obj.bounds().sample_uniform(rng);
            let f = obj.value(&x);
            counter.add(1);
            improved |= tracker.offer(&x, f);
            *slot = x;
        }
        let is_last = k + 1 >= max_iters || counter.count() + cost > cfg.budget;
        let reached = tracker.evals_at_success.is_none() && tracker.best_f < cfg.success_threshold;
        let stopping = is_last || (cfg.early_stop && reached);
        tracker.close_iteration(k, 1.0, counter.count(), improved || stopping);
        k += 1;
        if stopping {
            break;
        }
    }
    Ok(tracker.finish(Method::Prs, last, counter.count(), k))
}

/// Dispatches on `cfg.method`.
pub fn run(obj: &dyn Objective, cfg: &RunConfig, trial: u64) -> Result<RunRecord> {
    match cfg.method {
        Method::Pgho => pgho_run(obj, cfg, trial),
        Method::Gh => gh_run(obj, cfg, trial),
        Method::Gd | Method::Adam => baseline_run(obj, cfg, trial),
        Method::Prs => prs_run(obj, cfg, trial),
    }
}
