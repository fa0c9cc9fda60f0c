//! Monte Carlo soft-min energy, its Boltzmann-weighted gradient, and the
//! uniformly weighted classical Gaussian-homotopy estimator.

use crate::error::{Error, Result};
use crate::objectives::{check_finite, EvalCounter, Objective};
use crate::smoothing::noise::NoiseBatch;
use crate::smoothing::schedule::{Schedule, SchedulePoint};

/// Soft-min energy, its gradient, and the per-sample softmax weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub value: f64,
    pub grad: Vec<f64>,
    pub weights: Vec<f64>,
    pub samples_used: usize,
}

fn check_shapes(obj: &dyn Objective, x: &[f64], noise: &NoiseBatch) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    if noise.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: noise.dim(),
        });
    }
    check_finite(x)
}

fn perturbed(x: &[f64], z: &[f64], alpha: f64, beta: f64, out: &mut [f64]) {
    for ((o, xi), zi) in out.iter_mut().zip(x).zip(z) {
        *o = alpha * xi + beta * zi;
    }
}

fn finite_sample(sample: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteSample { sample, value })
    }
}

/// Softmax of `-values / lambda`, shifted by the minimum. Returns the weights
/// and the stabilized soft-min `min - lambda * log(mean(exp(-(v - min) / lambda)))`.
pub fn softmin_weights(values: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = values.iter().map(|v| (-(v - min) / lambda).exp()).collect();
    let total = pairwise_sum(&weights);
    for w in &mut weights {
        *w /= total;
    }
    let value = min - lambda * (total / values.len() as f64).ln();
    (weights, value)
}

/// Fixed-order pairwise summation.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// `sum_k weights[k] * rows[k]` reduced pairwise over `k`.
///
/// With equal power-of-two weights and identical rows this returns the row
/// exactly.
fn weighted_rows(weights: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    match rows.len() {
        0 => Vec::new(),
        1 => rows[0].iter().map(|v| weights[0] * v).collect(),
        n => {
            let mid = n / 2;
            let mut left = weighted_rows(&weights[..mid], &rows[..mid]);
            let right = weighted_rows(&weights[mid..], &rows[mid..]);
            for (l, r) in left.iter_mut().zip(right) {
                *l += r;
            }
            left
        }
    }
}

/// Monte Carlo soft-min energy at `x`, using the schedule point for `t`.
/// Charges `K` evaluations.
pub fn softmin_value(
    obj: &dyn Objective,
    x: &[f64],
    t: f64,
    schedule: &Schedule,
    noise: &NoiseBatch,
    counter: &mut EvalCounter,
) -> Result<f64> {
    softmin_value_at(obj, x, &schedule.eval(t)?, noise, counter)
}

pub fn softmin_value_at(
    obj: &dyn Objective,
    x: &[f64],
    point: &SchedulePoint,
    noise: &NoiseBatch,
    counter: &mut EvalCounter,
) -> Result<f64> {
    check_shapes(obj, x, noise)?;
    let mut y = vec![0.0; x.len()];
    let mut values = Vec::with_capacity(noise.samples());
    for (k, z) in noise.rows().enumerate() {
        perturbed(x, z, point.alpha, point.beta, &mut y);
        values.push(finite_sample(k, obj.value(&y))?);
    }
    counter.add(noise.samples() as u64);
    Ok(softmin_weights(&values, point.lambda).1)
}

/// Boltzmann-weighted gradient estimate at `x`. Charges `K` combined
/// evaluations.
///
/// The returned gradient is the exact gradient of the Monte Carlo energy
/// computed by [`softmin_value`] with the same noise.
pub fn softmin_gradient(
    obj: &dyn Objective,
    x: &[f64],
    t: f64,
    schedule: &Schedule,
    noise: &NoiseBatch,
    counter: &mut EvalCounter,
) -> Result<GradientEstimate> {
    softmin_gradient_at(obj, x, &schedule.eval(t)?, noise, counter)
}

pub fn softmin_gradient_at(
    obj: &dyn Objective,
    x: &[f64],
    point: &SchedulePoint,
    noise: &NoiseBatch,
    counter: &mut EvalCounter,
) -> Result<GradientEstimate> {
    let (values, mut grads) = sample_values_and_grads(obj, x, point.alpha, point.beta, noise)?;
    counter.add(noise.samples() as u64);
    let (weights, value) = softmin_weights(&values, point.lambda);
    let mut grad = if point.beta == 0.0 {
        // Every sample sits at alpha * x.
        grads.swap_remove(0)
    } else {
        weighted_rows(&weights, &grads)
    };
    if point.alpha != 1.0 {
        grad.iter_mut().for_each(|g| *g *= point.alpha);
    }
    Ok(GradientEstimate {
        value,
        grad,
        weights,
        samples_used: noise.samples(),
    })
}

/// Classical Gaussian-homotopy estimate: the uniform average of `f` and
/// `grad f` at `x + sigma * z_k`. Charges `K` combined evaluations.
pub fn classical_gh_gradient(
    obj: &dyn Objective,
    x: &[f64],
    sigma: f64,
    noise: &NoiseBatch,
    counter: &mut EvalCounter,
) -> Result<(f64, Vec<f64>)> {
    let (values, mut grads) = sample_values_and_grads(obj, x, 1.0, sigma, noise)?;
    counter.add(noise.samples() as u64);
    if sigma == 0.0 {
        return Ok((values[0], grads.swap_remove(0)));
    }
    let k = noise.samples() as f64;
    let uniform = vec![1.0 / k; noise.samples()];
    Ok((pairwise_sum(&values) / k, weighted_rows(&uniform, &grads)))
}

fn sample_values_and_grads(
    obj: &dyn Objective,
    x: &[f64],
    alpha: f64,
    beta: f64,
    noise: &NoiseBatch,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_shapes(obj, x, noise)?;
    let mut y = vec![0.0; x.len()];
    let mut values = Vec::with_capacity(noise.samples());
    let mut grads = Vec::with_capacity(noise.samples());
    for (k, z) in noise.rows().enumerate() {
        perturbed(x, z, alpha, beta, &mut y);
        let mut g = vec![0.0; x.len()];
        let f = finite_sample(k, obj.value_and_gradient(&y, &mut g))?;
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                sample: k,
                value: g[i],
            });
        }
        values.push(f);
        grads.push(g);
    }
    Ok((values, grads))
}
