//! Local objectives `F_i(x) = E_ξ f_i(x, ξ)` behind a uniform contract: noisy
//! zero-order queries for the algorithm, exact expectation and gradient for
//! instrumentation only.

mod dataset;
mod logistic;
mod simple;

pub use dataset::{partition, two_gaussians, Dataset};
pub use logistic::{classification_accuracy, logistic_objective, LogisticObjective, SIGMOID_CURVATURE_MAX};
pub use simple::{quadratic_objective, LinearObjective, QuadraticObjective};

use std::fmt;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::SimRng;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("too few samples: {m} samples cannot cover {n} agents")]
    TooFewSamples { m: usize, n: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid objective parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A local objective held by one agent.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// One noisy function value `f̃_i(x, ξ) = f_i(x, ξ) + ζ` with fresh `ξ` and `ζ`.
    fn query(&self, x: &[f64], rng: &mut SimRng) -> Result<f64, ObjectiveError>;

    /// Noise-free expectation `F_i(x)`.
    fn expected_value(&self, x: &[f64]) -> Result<f64, ObjectiveError>;

    /// Exact `∇F_i(x)`. Instrumentation and baselines only.
    fn true_grad(&self, x: &[f64]) -> Result<Vec<f64>, ObjectiveError>;

    /// Bound `σ₁` on `‖∇²F_i‖`.
    fn smoothness(&self) -> f64;

    /// A value known to be `≤ inf_x F_i(x)`.
    fn lower_bound(&self) -> f64;

    fn check_dim(&self, x: &[f64]) -> Result<(), ObjectiveError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(ObjectiveError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn query(&self, x: &[f64], rng: &mut SimRng) -> Result<f64, ObjectiveError> {
        (**self).query(x, rng)
    }
    fn expected_value(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        (**self).expected_value(x)
    }
    fn true_grad(&self, x: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        (**self).true_grad(x)
    }
    fn smoothness(&self) -> f64 {
        (**self).smoothness()
    }
    fn lower_bound(&self) -> f64 {
        (**self).lower_bound()
    }
}

/// Query noise: additive `ζ ~ N(0, zeta_sigma²)` and the multiplicative
/// per-sample factor `u ~ N(1, u_sigma²)` used by the logistic loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub zeta_sigma: f64,
    pub u_sigma: f64,
}

impl NoiseModel {
    pub fn new(zeta_sigma: f64, u_sigma: f64) -> Result<Self, ObjectiveError> {
        if !(zeta_sigma >= 0.0 && zeta_sigma.is_finite() && u_sigma >= 0.0 && u_sigma.is_finite()) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "noise std must be finite and nonnegative (zeta {zeta_sigma}, u {u_sigma})"
            )));
        }
        Ok(NoiseModel { zeta_sigma, u_sigma })
    }

    pub const fn off() -> Self {
        NoiseModel {
            zeta_sigma: 0.0,
            u_sigma: 0.0,
        }
    }

    /// Additive noise variance `σ₂`.
    pub fn sigma2(&self) -> f64 {
        self.zeta_sigma * self.zeta_sigma
    }

    pub(crate) fn draw_zeta(&self, rng: &mut SimRng) -> f64 {
        gaussian(0.0, self.zeta_sigma, rng)
    }
}

pub(crate) fn gaussian(mean: f64, std: f64, rng: &mut SimRng) -> f64 {
    if std == 0.0 {
        return mean;
    }
    // std > 0 and finite is checked at construction.
    Normal::new(mean, std).expect("valid normal").sample(rng)
}
