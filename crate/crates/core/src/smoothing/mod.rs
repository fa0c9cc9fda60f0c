//! Homotopy schedules, Monte Carlo soft-min estimators, and 1D quadrature
//! oracles.

pub mod estimator;
pub mod noise;
pub mod quadrature;
pub mod schedule;

pub use estimator::{
    classical_gh_gradient, softmin_gradient, softmin_gradient_at, softmin_value, softmin_value_at,
    softmin_weights, GradientEstimate,
};
pub use noise::NoiseBatch;
pub use quadrature::{
    log_marginal_quadrature_1d, moreau_oracle_1d, pgh_energy_quadrature_1d, pgh_energy_quadrature_at,
    posterior_mean_quadrature_1d, soft_moreau_quadrature_1d, tweedie_mean_1d, GaussHermite, Grid,
};
pub use schedule::{Schedule, ScheduleKind, SchedulePoint};
