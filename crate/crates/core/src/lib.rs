//! Gaussian homotopy optimization with soft-min gradient estimates.
//!
//! The optimizer descends the soft-min energy
//! `F_t(x) = -lambda(t) log E_z[exp(-f(alpha(t) x + beta(t) z) / lambda(t))]`
//! while annealing `t` from 0 to 1. Its Monte Carlo gradient is a softmax
//! (Boltzmann) weighted average of perturbed gradients, so low-valued
//! perturbations dominate the step. Classical Gaussian homotopy, plain
//! GD/Adam, and pure random search are provided as baselines, together with
//! benchmark and sparse-recovery harnesses.

pub mod config;
pub mod error;
pub mod harness;
pub mod objectives;
pub mod optimizers;
pub mod rng;
pub mod smoothing;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
