use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the `(alpha, beta, lambda)` path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `alpha = 1`, `beta = eps * sqrt(1 - t)`, `lambda = max(beta^2, lambda_min)`.
    Canonical,
    /// `alpha = 1`, `beta = eps * (1 - t)`, `lambda = max(beta^2, lambda_min)`.
    LinearBeta,
    /// `alpha = 1`, `beta = eps * sqrt(1 - t)`, `lambda = max(temperature * beta^2, lambda_min)`.
    Custom,
}

/// Smoothing schedule on `t in [0, 1]`. `beta(1) = 0` for every kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Perturbation scale `beta(0)`.
    pub epsilon: f64,
    pub lambda_min: f64,
    /// Temperature multiplier for [`ScheduleKind::Custom`].
    pub temperature: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::canonical(1.0)
    }
}

/// One point on the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

pub const DEFAULT_LAMBDA_MIN: f64 = 1e-8;

impl Schedule {
    pub fn canonical(epsilon: f64) -> Self {
        Self {
            kind: ScheduleKind::Canonical,
            epsilon,
            lambda_min: DEFAULT_LAMBDA_MIN,
            temperature: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "schedule epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.lambda_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_min must be positive, got {}",
                self.lambda_min
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Evaluates `(alpha, beta, lambda)` at `t`.
    pub fn eval(&self, t: f64) -> Result<SchedulePoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let remaining = 1.0 - t;
        let (beta, temperature) = match self.kind {
            ScheduleKind::Canonical => (self.epsilon * remaining.sqrt(), 1.0),
            ScheduleKind::LinearBeta => (self.epsilon * remaining, 1.0),
            ScheduleKind::Custom => (self.epsilon * remaining.sqrt(), self.temperature),
        };
        Ok(SchedulePoint {
            alpha: 1.0,
            beta,
            lambda: (temperature * beta * beta).max(self.lambda_min),
        })
    }
}
