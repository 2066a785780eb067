//! Distributed nonconvex optimization with one-point zero-order gradient
//! estimates and gradient tracking.
//!
//! Agents on an undirected graph each hold a local objective they can only
//! query through noisy function values. Every round, each agent forms a
//! one-point gradient estimate, mixes its iterate and tracker with its
//! neighbors through a doubly stochastic matrix, and updates.
//!
//! Modules:
//! - [`topology`]: graphs, Laplacian mixing weights, spectral gap.
//! - [`objectives`]: noisy local objectives and datasets.
//! - [`estimators`]: one-point and reference gradient estimators.
//! - [`engine`]: the tracking recursion, schedules and the rate bound.
//! - [`oracles`]: independent numerical checks.
//! - [`harness`]: configuration, experiment runner and outputs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod oracles;
pub mod rng;
pub mod topology;

pub use engine::{StepSchedule, SwarmState, Tracker};
pub use estimators::EstimatorKind;
pub use linalg::Mat;
pub use topology::{Graph, MixingMatrix};
