//! Synchronous gradient-tracking rounds in matrix form:
//!
//! ```text
//! x_{k+1} = W (x_k − η_k y_k)
//! g_{k+1} = estimates at x_{k+1} with radius γ_{k+1}
//! y_{k+1} = W y_k + g_{k+1} − g_k
//! ```
//!
//! Each agent owns an independent RNG stream, so per-agent estimation can run
//! in parallel without changing the trajectory.

mod rate;
mod schedule;

pub use rate::{rate_bound, rate_constants, RateConstants, RateInputs};
pub use schedule::{validate_schedule, validate_schedule_for_rate, ScheduleViolation, StepSchedule};

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{estimate, EstimatorError, EstimatorKind};
use crate::linalg::{norm_sq, Mat};
use crate::objectives::Objective;
use crate::rng::SimRng;
use crate::topology::MixingMatrix;

/// Default iterate-norm level above which a diagnostic is raised.
pub const DEFAULT_NORM_GUARD: f64 = 1e6;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid schedule: {}", join_violations(.0))]
    InvalidSchedule(Vec<ScheduleViolation>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("division domain error: {0}")]
    DivisionDomain(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

fn join_violations(v: &[ScheduleViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Agent-stacked algorithm state after `k` rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub x: Mat,
    pub y: Mat,
    pub g_prev: Mat,
    pub k: usize,
}

impl SwarmState {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn mean_x(&self) -> Vec<f64> {
        self.x.row_mean()
    }

    pub fn mean_y(&self) -> Vec<f64> {
        self.y.row_mean()
    }

    pub fn mean_g(&self) -> Vec<f64> {
        self.g_prev.row_mean()
    }

    /// `‖x − 𝟙x̄‖²`.
    pub fn consensus_err(&self) -> f64 {
        self.x.deviation_sq()
    }

    /// `‖y − 𝟙ȳ‖²`.
    pub fn tracking_err(&self) -> f64 {
        self.y.deviation_sq()
    }
}

/// One recorded iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub eta: f64,
    pub gamma: f64,
    /// `F(x̄_k)` with `F = (1/n) Σ F_i`, noise free.
    pub loss: f64,
    pub consensus_err: f64,
    pub tracking_err: f64,
    /// `‖∇F(x̄_k)‖²`.
    pub grad_norm_sq: f64,
    pub accuracy: Option<f64>,
}

/// Value and gradient of `F = (1/n) Σ F_i` at a single point, summed in agent
/// order.
pub fn global_value_and_grad<O: Objective + Sync>(objectives: &[O], x: &[f64]) -> Result<(f64, Vec<f64>), EngineError> {
    let n = objectives.len() as f64;
    let per_agent: Vec<(f64, Vec<f64>)> = objectives
        .par_iter()
        .map(|o| Ok((o.expected_value(x)?, o.true_grad(x)?)))
        .collect::<Result<_, EstimatorError>>()?;
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    for (v, g) in per_agent {
        value += v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((value / n, grad))
}

pub fn metrics<O: Objective + Sync>(
    state: &SwarmState,
    objectives: &[O],
    schedule: &StepSchedule,
) -> Result<MetricsRow, EngineError> {
    let (loss, grad) = global_value_and_grad(objectives, &state.mean_x())?;
    Ok(MetricsRow {
        k: state.k,
        eta: schedule.eta(state.k),
        gamma: schedule.gamma(state.k),
        loss,
        consensus_err: state.consensus_err(),
        tracking_err: state.tracking_err(),
        grad_norm_sq: norm_sq(&grad),
        accuracy: None,
    })
}

/// Drives the tracking recursion for one set of agents.
pub struct Tracker<'a, O> {
    mixing: &'a MixingMatrix,
    objectives: &'a [O],
    schedule: StepSchedule,
    kind: EstimatorKind,
    rngs: Vec<SimRng>,
    norm_guard: f64,
    guard_tripped: bool,
}

impl<'a, O: Objective + Sync> Tracker<'a, O> {
    /// `rngs` holds one stream per agent.
    pub fn new(
        mixing: &'a MixingMatrix,
        objectives: &'a [O],
        schedule: StepSchedule,
        kind: EstimatorKind,
        rngs: Vec<SimRng>,
    ) -> Result<Self, EngineError> {
        let n = mixing.n();
        if objectives.len() != n || rngs.len() != n {
            return Err(EngineError::DimensionMismatch(format!(
                "mixing matrix has {n} agents, got {} objectives and {} rng streams",
                objectives.len(),
                rngs.len()
            )));
        }
        Ok(Tracker {
            mixing,
            objectives,
            schedule,
            kind,
            rngs,
            norm_guard: DEFAULT_NORM_GUARD,
            guard_tripped: false,
        })
    }

    pub fn with_norm_guard(mut self, guard: f64) -> Self {
        self.norm_guard = guard;
        self
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn objectives(&self) -> &[O] {
        self.objectives
    }

    pub fn mixing(&self) -> &MixingMatrix {
        self.mixing
    }

    /// Whether any iterate has exceeded the norm guard so far.
    pub fn guard_tripped(&self) -> bool {
        self.guard_tripped
    }

    fn estimates(&mut self, x: &Mat, gamma: f64) -> Result<Mat, EngineError> {
        let kind = self.kind;
        let d = x.cols();
        let rows: Vec<Vec<f64>> = self
            .objectives
            .par_iter()
            .zip(self.rngs.par_iter_mut())
            .enumerate()
            .map(|(i, (obj, rng))| estimate(kind, obj, x.row(i), gamma, rng).map(|e| e.g))
            .collect::<Result<_, _>>()?;
        let mut g = Mat::zeros(x.rows(), d);
        for (dst, src) in g.rows_iter_mut().zip(rows) {
            dst.copy_from_slice(&src);
        }
        Ok(g)
    }

    /// Queries every agent at `x₀ + γ₀z` and sets `y₀ = g₀`.
    pub fn init(&mut self, x0: Mat) -> Result<SwarmState, EngineError> {
        if x0.rows() != self.mixing.n() {
            return Err(EngineError::DimensionMismatch(format!(
                "x0 has {} rows for {} agents",
                x0.rows(),
                self.mixing.n()
            )));
        }
        if !x0.is_finite() {
            return Err(EngineError::InvalidParameter("x0 has non-finite entries".into()));
        }
        let g = self.estimates(&x0, self.schedule.gamma(0))?;
        Ok(SwarmState {
            x: x0,
            y: g.clone(),
            g_prev: g,
            k: 0,
        })
    }

    /// One synchronous round.
    pub fn step(&mut self, state: &mut SwarmState) -> Result<(), EngineError> {
        if state.x.shape() != state.y.shape()
            || state.x.shape() != state.g_prev.shape()
            || state.n() != self.mixing.n()
        {
            return Err(EngineError::DimensionMismatch(format!(
                "state shapes x {:?}, y {:?}, g {:?} against {} agents",
                state.x.shape(),
                state.y.shape(),
                state.g_prev.shape(),
                self.mixing.n()
            )));
        }
        let k = state.k;
        let eta = self.schedule.eta(k);
        let x_next = self.mixing.mix(&state.x.add_scaled(-eta, &state.y));
        let g_next = self.estimates(&x_next, self.schedule.gamma(k + 1))?;
        let y_next = self.mixing.mix(&state.y).add_scaled(1.0, &g_next).add_scaled(-1.0, &state.g_prev);

        state.x = x_next;
        state.y = y_next;
        state.g_prev = g_next;
        state.k = k + 1;

        if !self.guard_tripped && state.x.frobenius() > self.norm_guard {
            self.guard_tripped = true;
            log::warn!(
                "iterate norm {:.3e} exceeded guard {:.3e} at k = {}",
                state.x.frobenius(),
                self.norm_guard,
                state.k
            );
        }
        Ok(())
    }
}
