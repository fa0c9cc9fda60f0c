//! Differentiable objectives, the benchmark registry, and gradient validation.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if let Some(i) = lo.iter().zip(&hi).position(|(l, h)| !(l < h)) {
            return Err(Error::InvalidConfig(format!(
                "bounds component {i}: lo = {} is not below hi = {}",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty box");
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Projects `x` onto the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.random_range(*l..*h))
            .collect()
    }
}

/// A known global minimizer and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub f: f64,
}

/// A differentiable scalar field on `R^dim` with a box domain.
///
/// Implementations must be pure: the same input always yields the same output.
/// The box constrains iterates and initialization only; `value` and `gradient`
/// must be defined on all of `R^dim`.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient at `x` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Combined evaluation; override when value and gradient share work.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.value(x)
    }

    fn bounds(&self) -> &Bounds;

    fn optimum(&self) -> Option<&Optimum> {
        None
    }
}

/// Number of combined `(f, grad f)` evaluations consumed by a run.
///
/// A raw `f` evaluation (success check, random search sample) also counts as one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    count: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, n: u64) {
        self.count += n;
    }

    /// Folds a per-worker counter into this one.
    pub fn merge(&mut self, other: &EvalCounter) {
        self.count += other.count;
    }
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteInput {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

/// Evaluates `f` and `grad f` at `x`, charging exactly one evaluation.
pub fn eval_with_grad(
    obj: &dyn Objective,
    x: &[f64],
    counter: &mut EvalCounter,
) -> Result<(f64, Vec<f64>)> {
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    check_finite(x)?;
    let mut grad = vec![0.0; x.len()];
    let f = obj.value_and_gradient(x, &mut grad);
    counter.add(1);
    Ok((f, grad))
}

/// Maximum componentwise relative error between the analytic gradient and a
/// central-difference estimate with step `h`.
///
/// The denominator is `max(|analytic_i|, |numeric_i|, 1e-8)`.
pub fn fd_gradient_check(obj: &dyn Objective, x: &[f64], h: f64) -> f64 {
    let mut analytic = vec![0.0; x.len()];
    obj.gradient(x, &mut analytic);
    let numeric = central_difference(|p| obj.value(p), x, h);
    max_relative_error(&analytic, &numeric, 1e-8)
}

/// Central-difference gradient of a scalar function.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs() / u.abs().max(v.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Names accepted by [`make_benchmark`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Ackley,
    Griewank,
    Alpine1,
    Levy,
    LogRosen,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 5] = [
        BenchmarkKind::Ackley,
        BenchmarkKind::Griewank,
        BenchmarkKind::Alpine1,
        BenchmarkKind::Levy,
        BenchmarkKind::LogRosen,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkKind::Ackley => "ackley",
            BenchmarkKind::Griewank => "griewank",
            BenchmarkKind::Alpine1 => "alpine1",
            BenchmarkKind::Levy => "levy",
            BenchmarkKind::LogRosen => "logrosen",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownObjective(s.to_string()))
    }
}

/// Default `alpha` of the log-Rosenbrock demo surface.
pub const LOGROSEN_DEFAULT_ALPHA: f64 = 10.0;

/// One of the built-in test functions.
#[derive(Debug, Clone)]
pub struct Benchmark {
    kind: BenchmarkKind,
    name: String,
    bounds: Bounds,
    optimum: Option<Optimum>,
    alpha: f64,
}

/// Builds a benchmark by kind. `logrosen` is two-dimensional only.
pub fn make_benchmark(kind: BenchmarkKind, dim: usize) -> Result<Benchmark> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            name: kind.to_string(),
            dim,
            reason: "dimension must be positive",
        });
    }
    let (bounds, optimum) = match kind {
        BenchmarkKind::Ackley => (Bounds::cube(dim, -5.0, 5.0), Some(vec![0.0; dim])),
        BenchmarkKind::Griewank => (Bounds::cube(dim, -600.0, 600.0), Some(vec![0.0; dim])),
        BenchmarkKind::Alpine1 => (Bounds::cube(dim, -10.0, 10.0), Some(vec![0.0; dim])),
        BenchmarkKind::Levy => (Bounds::cube(dim, -10.0, 10.0), Some(vec![1.0; dim])),
        BenchmarkKind::LogRosen => {
            if dim != 2 {
                return Err(Error::InvalidDimension {
                    name: kind.to_string(),
                    dim,
                    reason: "logrosen is defined in two dimensions only",
                });
            }
            (Bounds::cube(2, -2.0, 2.0), None)
        }
    };
    Ok(Benchmark {
        kind,
        name: kind.to_string(),
        bounds,
        optimum: optimum.map(|x| Optimum { x, f: 0.0 }),
        alpha: LOGROSEN_DEFAULT_ALPHA,
    })
}

/// Registry lookup by name string.
pub fn make_benchmark_by_name(name: &str, dim: usize) -> Result<Benchmark> {
    make_benchmark(name.parse()?, dim)
}

impl Benchmark {
    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Sets the log-Rosenbrock ripple amplitude; ignored by the other kinds.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

impl Objective for Benchmark {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.bounds.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            BenchmarkKind::Ackley => ackley(x, None),
            BenchmarkKind::Griewank => griewank(x, None),
            BenchmarkKind::Alpine1 => alpine1(x, None),
            BenchmarkKind::Levy => levy(x, None),
            BenchmarkKind::LogRosen => logrosen(x, self.alpha, None),
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self.kind {
            BenchmarkKind::Ackley => ackley(x, Some(grad)),
            BenchmarkKind::Griewank => griewank(x, Some(grad)),
            BenchmarkKind::Alpine1 => alpine1(x, Some(grad)),
            BenchmarkKind::Levy => levy(x, Some(grad)),
            BenchmarkKind::LogRosen => logrosen(x, self.alpha, Some(grad)),
        }
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }
}

fn ackley(x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = x.len() as f64;
    let r = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let c = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    let radial = (-0.2 * r).exp();
    let ripple = c.exp();
    if let Some(g) = grad {
        // The radial term is a cone at the origin; use the zero subgradient there.
        let radial_scale = if r > 0.0 { 4.0 * radial / (n * r) } else { 0.0 };
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = radial_scale * xi + 2.0 * PI / n * ripple * (2.0 * PI * xi).sin();
        }
    }
    (20.0 - 20.0 * radial) + (E - ripple)
}

fn griewank(x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let scaled: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v / ((i + 1) as f64).sqrt())
        .collect();
    let cosines: Vec<f64> = scaled.iter().map(|s| s.cos()).collect();
    let product: f64 = cosines.iter().product();
    if let Some(g) = grad {
        // Product over j != i via prefix/suffix products, exact at zeros of cos.
        let n = x.len();
        let mut prefix = vec![1.0; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] * cosines[i];
        }
        let mut suffix = 1.0;
        for i in (0..n).rev() {
            let others = prefix[i] * suffix;
            g[i] = x[i] / 20.0 + scaled[i].sin() / ((i + 1) as f64).sqrt() * others;
            suffix *= cosines[i];
        }
    }
    x.iter().map(|v| v * v).sum::<f64>() / 40.0 - product + 1.0
}

fn alpine1(x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    if let Some(g) = grad {
        for (gi, v) in g.iter_mut().zip(x) {
            let u = v * v.sin() + 0.1 * v;
            let sign = if u > 0.0 {
                1.0
            } else if u < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gi = sign * (v.sin() + v * v.cos() + 0.1);
        }
    }
    x.iter().map(|v| (v * v.sin() + 0.1 * v).abs()).sum()
}

fn levy(x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = x.len();
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let mut f = (PI * w[0]).sin().powi(2);
    for wi in &w[..n - 1] {
        f += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    let wn = w[n - 1];
    f += (wn - 1.0).powi(2) * (1.0 + (2.0 * PI * wn).sin().powi(2));

    if let Some(g) = grad {
        // Derivatives with respect to w, then the chain factor dw/dx = 1/4.
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] += PI * (2.0 * PI * w[0]).sin();
        for i in 0..n - 1 {
            let d = w[i] - 1.0;
            let s = (PI * w[i] + 1.0).sin();
            g[i] += 2.0 * d * (1.0 + 10.0 * s * s) + d * d * 10.0 * PI * (2.0 * (PI * w[i] + 1.0)).sin();
        }
        let d = wn - 1.0;
        let s = (2.0 * PI * wn).sin();
        g[n - 1] += 2.0 * d * (1.0 + s * s) + d * d * 2.0 * PI * (4.0 * PI * wn).sin();
        g.iter_mut().for_each(|gi| *gi *= 0.25);
    }
    f
}

/// `log(Rosen(x1, x2) + alpha * (1 + sin(3 x1) sin(3 x2)))`.
fn logrosen(x: &[f64], alpha: f64, grad: Option<&mut [f64]>) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let bend = x2 - x1 * x1;
    let rosen = (1.0 - x1).powi(2) + 100.0 * bend * bend;
    let (s1, s2) = ((3.0 * x1).sin(), (3.0 * x2).sin());
    let inner = rosen + alpha * (1.0 + s1 * s2);
    if let Some(g) = grad {
        let d1 = -2.0 * (1.0 - x1) - 400.0 * x1 * bend + 3.0 * alpha * (3.0 * x1).cos() * s2;
        let d2 = 200.0 * bend + 3.0 * alpha * s1 * (3.0 * x2).cos();
        g[0] = d1 / inner;
        g[1] = d2 / inner;
    }
    inner.ln()
}

/// `0.5 * ||x - center||^2`, used as a well-conditioned test objective.
#[derive(Debug, Clone)]
pub struct Quadratic {
    center: Vec<f64>,
    bounds: Bounds,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if center.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: center.len(),
            });
        }
        Ok(Self { center, bounds })
    }

    /// Centered at the origin on `[-half_width, half_width]^dim`.
    pub fn centered(dim: usize, half_width: f64) -> Self {
        Self {
            center: vec![0.0; dim],
            bounds: Bounds::cube(dim, -half_width, half_width),
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .map(|(v, c)| (v - c) * (v - c))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, v), c) in grad.iter_mut().zip(x).zip(&self.center) {
            *g = v - c;
        }
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}
