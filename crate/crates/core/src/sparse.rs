//! Compressed-sensing problems with a smooth ℓ₀ penalty and the
//! regularization-path sweep.

use std::sync::Arc;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Bounds, Objective};
use crate::optimizers::{self, Init, RunConfig};
use crate::rng::{StreamKey, PROBLEM_SLOT};

/// Half-width of the box used for the otherwise unconstrained sparse objective.
pub const SPARSE_BOX: f64 = 1e6;

/// Evaluation budget for sparse runs, large enough that `max_iters` binds.
pub const SPARSE_BUDGET: u64 = 1 << 40;

/// Minimum magnitude of a ground-truth nonzero.
pub const NONZERO_FLOOR: f64 = 0.5;

/// `y = A x_true + noise` with `A` stored row-major, `m x n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseProblem {
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub x_true: Vec<f64>,
    pub noise_sigma: f64,
    pub tau: f64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

/// Draws `A` with `N(0, 1/m)` entries, a uniformly random support of size
/// `k` with standard normal nonzeros pushed to magnitude at least 0.5, and
/// Gaussian measurement noise of scale `noise_sigma`.
pub fn generate_sparse_problem(
    n: usize,
    m: usize,
    k: usize,
    noise_sigma: f64,
    tau: f64,
    seed: u64,
) -> Result<SparseProblem> {
    if m == 0 || m >= n {
        return Err(Error::InfeasibleShape(format!("need 0 < m < n, got m={m} n={n}")));
    }
    if k > n {
        return Err(Error::InfeasibleShape(format!("sparsity k={k} exceeds n={n}")));
    }
    if !(tau > 0.0) || !(noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tau must be positive and noise_sigma non-negative, got {tau} and {noise_sigma}"
        )));
    }
    let mut rng = StreamKey::new(seed, 0).slot(PROBLEM_SLOT).rng();
    let scale = 1.0 / (m as f64).sqrt();
    let a: Vec<f64> = (0..m * n)
        .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); scale * z })
        .collect();
    let mut x_true = vec![0.0; n];
    for i in index::sample(&mut rng, n, k) {
        let z: f64 = StandardNormal.sample(&mut rng);
        x_true[i] = z.signum() * z.abs().max(NONZERO_FLOOR);
    }
    let mut y = mat_vec(&a, m, n, &x_true);
    for yi in &mut y {
        let z: f64 = StandardNormal.sample(&mut rng);
        *yi += noise_sigma * z;
    }
    Ok(SparseProblem {
        a,
        y,
        x_true,
        noise_sigma,
        tau,
        m,
        n,
        k,
        seed,
    })
}

fn mat_vec(a: &[f64], m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    (0..m)
        .map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

impl SparseProblem {
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = mat_vec(&self.a, self.m, self.n, x);
        r.iter_mut().zip(&self.y).for_each(|(ri, yi)| *ri -= yi);
        r
    }

    /// `½‖Ax − y‖²`.
    pub fn misfit(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).iter().map(|r| r * r).sum::<f64>()
    }

    /// `Σ (1 − exp(−x_i² / τ²))`.
    pub fn surrogate(&self, x: &[f64]) -> f64 {
        smooth_l0(x, self.tau)
    }

    /// Jaccard distance between `{i : |x_i| > τ}` and the true support.
    pub fn support_jaccard(&self, x: &[f64]) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (xi, ti) in x.iter().zip(&self.x_true) {
            let a = xi.abs() > self.tau;
            let b = *ti != 0.0;
            inter += usize::from(a && b);
            union += usize::from(a || b);
        }
        if union == 0 {
            0.0
        } else {
            1.0 - inter as f64 / union as f64
        }
    }
}

pub fn smooth_l0(x: &[f64], tau: f64) -> f64 {
    let inv = 1.0 / (tau * tau);
    x.iter().map(|v| 1.0 - (-v * v * inv).exp()).sum()
}

/// `f_τ(x) = ½‖Ax − y‖² + λ Σ (1 − exp(−x_i²/τ²))` on `[−1e6, 1e6]^n`.
#[derive(Debug, Clone)]
pub struct SmoothL0 {
    problem: Arc<SparseProblem>,
    lambda_reg: f64,
    bounds: Bounds,
}

pub fn smooth_l0_objective(problem: Arc<SparseProblem>, lambda_reg: f64) -> Result<SmoothL0> {
    if !(lambda_reg > 0.0 && lambda_reg.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda_reg must be positive, got {lambda_reg}")));
    }
    let bounds = Bounds::cube(problem.n, -SPARSE_BOX, SPARSE_BOX);
    Ok(SmoothL0 {
        problem,
        lambda_reg,
        bounds,
    })
}

impl SmoothL0 {
    pub fn problem(&self) -> &SparseProblem {
        &self.problem
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }
}

impl Objective for SmoothL0 {
    fn name(&self) -> &str {
        "smooth_l0"
    }

    fn dim(&self) -> usize {
        self.problem.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.problem.misfit(x) + self.lambda_reg * self.problem.surrogate(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let p = &*self.problem;
        let r = p.residual(x);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (i, ri) in r.iter().enumerate() {
            for (g, aij) in grad.iter_mut().zip(&p.a[i * p.n..(i + 1) * p.n]) {
                *g += aij * ri;
            }
        }
        let inv = 1.0 / (p.tau * p.tau);
        let mut surrogate = 0.0;
        for (g, xi) in grad.iter_mut().zip(x) {
            let e = (-xi * xi * inv).exp();
            surrogate += 1.0 - e;
            *g += self.lambda_reg * 2.0 * xi * inv * e;
        }
        0.5 * r.iter().map(|v| v * v).sum::<f64>() + self.lambda_reg * surrogate
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Final-iterate metrics for one `(method, λ)` cell, averaged over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub method: String,
    pub misfit: f64,
    pub surrogate: f64,
    pub objective: f64,
    pub support_jaccard: f64,
    pub seed: u64,
}

/// Regularization path of one problem, ordered by method then increasing λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub entries: Vec<PathEntry>,
}

impl PathRecord {
    /// Entries of one method in increasing λ.
    pub fn method(&self, label: &str) -> Vec<&PathEntry> {
        self.entries.iter().filter(|e| e.method == label).collect()
    }
}

/// Runs every method at every λ from the zero vector and records the final
/// iterate. `trials` independent driver seeds are averaged per cell.
pub fn lambda_path_sweep(
    problem: &SparseProblem,
    methods: &[RunConfig],
    lambdas: &[f64],
    trials: u64,
) -> Result<PathRecord> {
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("lambda grid must be strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    for cfg in methods {
        cfg.validate()?;
    }
    let shared = Arc::new(problem.clone());
    let cells: Vec<(usize, usize, u64)> = (0..methods.len())
        .flat_map(|mi| (0..lambdas.len()).flat_map(move |li| (0..trials).map(move |t| (mi, li, t))))
        .collect();
    let finals = cells
        .par_iter()
        .map(|&(mi, li, trial)| {
            let obj = smooth_l0_objective(shared.clone(), lambdas[li])?;
            let cfg = RunConfig {
                init: Init::Zero,
                ..methods[mi].clone()
            };
            let record = optimizers::run(&obj, &cfg, trial)?;
            let x = &record.final_particles[0];
            Ok([
                problem.misfit(x),
                problem.surrogate(x),
                obj.value(x),
                problem.support_jaccard(x),
            ])
        })
        .collect::<Result<Vec<[f64; 4]>>>()?;
    let mut entries = Vec::with_capacity(methods.len() * lambdas.len());
    for (mi, cfg) in methods.iter().enumerate() {
        for (li, &lambda) in lambdas.iter().enumerate() {
            let start = (mi * lambdas.len() + li) * trials as usize;
            let mut mean = [0.0; 4];
            for cell in &finals[start..start + trials as usize] {
                for (acc, v) in mean.iter_mut().zip(cell) {
                    *acc += v / trials as f64;
                }
            }
            entries.push(PathEntry {
                lambda,
                method: cfg.label(),
                misfit: mean[0],
                surrogate: mean[1],
                objective: mean[2],
                support_jaccard: mean[3],
                seed: problem.seed,
            });
        }
    }
    Ok(PathRecord { entries })
}

/// Sweep configuration: problem shape, λ grid, problem seeds and methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub noise_sigma: f64,
    pub tau: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    /// One problem instance per seed.
    pub seeds: Vec<u64>,
    /// Driver trials per problem and cell.
    pub trials: u64,
    pub methods: Vec<RunConfig>,
}

impl Default for SparseSpec {
    fn default() -> Self {
        Self {
            n: 500,
            m: 75,
            k: 10,
            noise_sigma: 0.01,
            tau: 0.05,
            lambda_min: 1e-2,
            lambda_max: 1.0,
            lambda_count: 30,
            seeds: vec![0, 1, 2],
            trials: 1,
            methods: default_sparse_methods(),
        }
    }
}

/// PGH-GD and plain GD with the sparse-recovery settings: sqrt t-schedule
/// from 0.37, ε = 0.1, K = 4, cosine step size from 0.05, 10,000 iterations.
pub fn default_sparse_methods() -> Vec<RunConfig> {
    use crate::optimizers::{LrSchedule, Method, TSchedule};
    use crate::smoothing::Schedule;
    let pgh = RunConfig {
        method: Method::Pgho,
        homotopy_steps: 10_000,
        max_iters: Some(10_000),
        particles: 1,
        samples: 4,
        eta0: 0.05,
        eta_min: 0.0,
        lr_schedule: LrSchedule::Cosine,
        t_schedule: TSchedule::SqrtFromTmin,
        t_min: 0.37,
        schedule: Schedule::canonical(0.1),
        budget: SPARSE_BUDGET,
        success_threshold: f64::NEG_INFINITY,
        early_stop: false,
        init: Init::Zero,
        ..RunConfig::default()
    };
    let gd = RunConfig {
        method: Method::Gd,
        ..pgh.clone()
    };
    vec![pgh, gd]
}

impl SparseSpec {
    pub fn lambdas(&self) -> Vec<f64> {
        log_spaced(self.lambda_min, self.lambda_max, self.lambda_count)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < lambda_min < lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.lambda_count == 0 || self.seeds.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig(
                "lambda_count, seeds and methods must be non-empty".into(),
            ));
        }
        for cfg in &self.methods {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Generates one problem per seed and sweeps each.
pub fn run_sparse_experiment(spec: &SparseSpec) -> Result<Vec<PathRecord>> {
    spec.validate()?;
    let lambdas = spec.lambdas();
    spec.seeds
        .iter()
        .map(|&seed| {
            let problem = generate_sparse_problem(spec.n, spec.m, spec.k, spec.noise_sigma, spec.tau, seed)?;
            let methods: Vec<RunConfig> = spec
                .methods
                .iter()
                .map(|c| RunConfig { seed, ..c.clone() })
                .collect();
            lambda_path_sweep(&problem, &methods, &lambdas, spec.trials)
        })
        .collect()
}

/// Per-λ mean over several path records for one method.
pub fn mean_path(records: &[PathRecord], label: &str) -> Vec<PathEntry> {
    let mut out: Vec<PathEntry> = Vec::new();
    for rec in records {
        for (i, e) in rec.method(label).into_iter().enumerate() {
            if i == out.len() {
                out.push(PathEntry { misfit: 0.0, surrogate: 0.0, objective: 0.0, support_jaccard: 0.0, ..e.clone() });
            }
            let w = 1.0 / records.len() as f64;
            out[i].misfit += w * e.misfit;
            out[i].surrogate += w * e.surrogate;
            out[i].objective += w * e.objective;
            out[i].support_jaccard += w * e.support_jaccard;
        }
    }
    out
}

/// Fraction of grid points with `λ ∈ [lo, hi]` where `a` attains final
/// objective at most that of `b`.
pub fn objective_win_fraction(a: &[PathEntry], b: &[PathEntry], lo: f64, hi: f64) -> f64 {
    let pairs: Vec<_> = a
        .iter()
        .zip(b)
        .filter(|(p, _)| p.lambda >= lo && p.lambda <= hi)
        .collect();
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|(p, q)| p.objective <= q.objective).count() as f64 / pairs.len() as f64
}

/// Fraction of `b`'s (misfit, surrogate) points weakly dominated by some
/// point of `a`.
pub fn frontier_dominance_fraction(a: &[PathEntry], b: &[PathEntry]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let dominated = b
        .iter()
        .filter(|q| a.iter().any(|p| p.misfit <= q.misfit && p.surrogate <= q.surrogate))
        .count();
    dominated as f64 / b.len() as f64
}
