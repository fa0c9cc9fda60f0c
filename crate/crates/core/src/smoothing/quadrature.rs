//! One-dimensional reference integrals used to check the smoothing
//! identities. None of this is on the optimization path.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::smoothing::schedule::{Schedule, SchedulePoint};

pub const DEFAULT_NODES: usize = 128;

/// Gauss-Hermite rule for `int exp(-u^2) g(u) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes and weights by Newton iteration on the orthonormal Hermite
    /// recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Quadrature("need at least one node".into()));
        }
        let nf = n as f64;
        let pi_quarter = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z: f64 = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut derivative = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let (mut p1, mut p2) = (pi_quarter, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                derivative = (2.0 * nf).sqrt() * p2;
                let step = p1 / derivative;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Quadrature(format!("node {i} of {n} did not converge")));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (derivative * derivative);
            weights[n - 1 - i] = weights[i];
        }
        nodes.reverse();
        weights.reverse();
        Ok(Self {
            nodes,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_weights.iter().map(|l| l.exp())
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights())
            .map(|(u, w)| w * g(*u))
            .sum()
    }

    /// `log int exp(-u^2) exp(log_g(u)) du`, evaluated in log space.
    pub fn log_integrate<F: Fn(f64) -> f64>(&self, log_g: F) -> Result<f64> {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(u, lw)| lw + log_g(*u))
            .collect();
        log_sum_exp(&terms)
    }

    /// `log E[exp(log_g(z))]` for `z ~ N(0, 1)`.
    pub fn log_expectation<F: Fn(f64) -> f64>(&self, log_g: F) -> Result<f64> {
        Ok(self.log_integrate(|u| log_g(SQRT_2 * u))? - 0.5 * PI.ln())
    }
}

fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Quadrature(format!(
            "integrand weights are degenerate (max log term {max})"
        )));
    }
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

/// Search grid for [`moreau_oracle_1d`].
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Moreau envelope `min_y f(y) + (x - y)^2 / (2 lambda)` by grid search
/// followed by ternary refinement around the best grid point.
pub fn moreau_oracle_1d<F: Fn(f64) -> f64>(f: F, x: f64, lambda: f64, grid: Grid) -> Result<f64> {
    if grid.points < 3 || !(grid.lo < grid.hi) {
        return Err(Error::InvalidConfig("moreau grid needs at least 3 points on a non-empty interval".into()));
    }
    let g = |y: f64| f(y) + (x - y) * (x - y) / (2.0 * lambda);
    let step = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let at = |i: usize| grid.lo + step * i as f64;
    let (best, best_val) = (0..grid.points)
        .map(|i| (i, g(at(i))))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if best == 0 || best == grid.points - 1 {
        return Err(Error::GridBoundary(at(best)));
    }
    let (mut a, mut b) = (at(best - 1), at(best + 1));
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) < g(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    Ok(g(0.5 * (a + b)).min(best_val))
}

/// Soft Moreau envelope `-lambda log int exp(-(f(y) + (x - y)^2 / (2 lambda)) / lambda) dy`.
///
/// The proximal factor is a Gaussian in `y` of standard deviation `lambda`,
/// so the rule is centered at `x` with that scale.
pub fn soft_moreau_quadrature_1d<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    lambda: f64,
    quad: &GaussHermite,
) -> Result<f64> {
    let scale = SQRT_2 * lambda;
    let log_integral = scale.ln() + quad.log_integrate(|u| -f(x + scale * u) / lambda)?;
    Ok(-lambda * log_integral)
}

/// Energy `-lambda(t) log E_z[exp(-f(alpha x + beta z) / lambda(t))]` at `t`.
pub fn pgh_energy_quadrature_1d<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    t: f64,
    schedule: &Schedule,
    quad: &GaussHermite,
) -> Result<f64> {
    pgh_energy_quadrature_at(f, x, &schedule.eval(t)?, quad)
}

/// As [`pgh_energy_quadrature_1d`] for an explicit `(alpha, beta, lambda)`.
pub fn pgh_energy_quadrature_at<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    point: &SchedulePoint,
    quad: &GaussHermite,
) -> Result<f64> {
    let center = point.alpha * x;
    if point.beta == 0.0 {
        return Ok(f(center));
    }
    let log_mean = quad.log_expectation(|z| -f(center + point.beta * z) / point.lambda)?;
    Ok(-point.lambda * log_mean)
}

/// `log p_lambda(x)` with `p_lambda(x) = int exp(-f(y)) N(x; y, lambda) dy`.
pub fn log_marginal_quadrature_1d<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    lambda: f64,
    quad: &GaussHermite,
) -> Result<f64> {
    let sd = lambda.sqrt();
    quad.log_expectation(|z| -f(x + sd * z))
}

/// Posterior mean `E[y | x]` under the prior `exp(-f(y))` and the
/// observation model `x = y + sqrt(lambda) z`.
pub fn posterior_mean_quadrature_1d<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    lambda: f64,
    quad: &GaussHermite,
) -> Result<f64> {
    let scale = (2.0 * lambda).sqrt();
    let points: Vec<(f64, f64)> = quad
        .nodes()
        .iter()
        .zip(&quad.log_weights)
        .map(|(u, lw)| {
            let y = x + scale * u;
            (y, lw - f(y))
        })
        .collect();
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Quadrature("posterior normalizer underflowed".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (y, lw) in points {
        let w = (lw - max).exp();
        num += w * y;
        den += w;
    }
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Quadrature("posterior normalizer underflowed".into()));
    }
    Ok(num / den)
}

/// `x - lambda * dF/dx` with `F = -log p_lambda`, the derivative taken by
/// central differences of the log-marginal quadrature.
pub fn tweedie_mean_1d<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    lambda: f64,
    quad: &GaussHermite,
    h: f64,
) -> Result<f64> {
    let up = log_marginal_quadrature_1d(&f, x + h, lambda, quad)?;
    let down = log_marginal_quadrature_1d(&f, x - h, lambda, quad)?;
    Ok(x + lambda * (up - down) / (2.0 * h))
}
