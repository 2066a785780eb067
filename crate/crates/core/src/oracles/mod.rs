//! Independent reference computations used to validate the other modules.
//!
//! Nothing here calls into the code it checks beyond the `Objective` value and
//! gradient contract: spectral norms come from a full SVD, gradients from
//! central differences, bounds from their closed forms.

mod suite;

pub use suite::run_oracle_suite;

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::engine::{MetricsRow, StepSchedule};
use crate::estimators::{bernoulli_moments, one_point, EstimatorError};
use crate::linalg::{norm, norm_sq, Mat};
use crate::objectives::{gaussian, LogisticObjective, Objective, ObjectiveError};
use crate::rng::SimRng;

pub const DENSE_SIZE_GUARD: usize = 256;
pub const MIN_SUMMABILITY_LEN: usize = 1_000;
/// Largest admissible share of a partial sum contributed by its last decade.
pub const TAIL_SHARE_LIMIT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense method limited to n <= {DENSE_SIZE_GUARD}, got {0}")]
    SizeGuard(usize),
    #[error("need at least {min} rows, got {len}")]
    InsufficientData { len: usize, min: usize },
    #[error("invalid oracle input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Outcome of one oracle check; `pass ⇔ |measured − reference| ≤ tolerance`.
/// One-sided checks `a ≤ b` (with `a ≥ 0`) use `reference = 0`, `tolerance = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        OracleReport {
            name: name.into(),
            measured,
            reference,
            tolerance,
            pass: (measured - reference).abs() <= tolerance,
        }
    }

    /// `measured ≤ bound` for a nonnegative measured quantity.
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        OracleReport::new(name, measured, 0.0, bound)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} measured={:e} reference={:e} tolerance={:e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.reference,
            self.tolerance
        )
    }
}

/// Central differences of the noise-free expectation, one coordinate at a time.
pub fn finite_diff_grad<O: Objective + ?Sized>(obj: &O, x: &[f64], h: f64) -> Result<Vec<f64>, OracleError> {
    if !(h > 0.0) {
        return Err(OracleError::InvalidInput(format!("step h = {h} must be positive")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = obj.expected_value(&probe)?;
        probe[j] = x[j] - h;
        let minus = obj.expected_value(&probe)?;
        probe[j] = x[j];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Largest singular value from a full SVD.
pub fn dense_spectral_norm(m: &Mat) -> Result<f64, OracleError> {
    let (r, c) = m.shape();
    if r.max(c) > DENSE_SIZE_GUARD {
        return Err(OracleError::SizeGuard(r.max(c)));
    }
    if r == 0 || c == 0 {
        return Ok(0.0);
    }
    let dm = DMatrix::from_row_slice(r, c, m.as_slice());
    Ok(dm.singular_values().iter().copied().fold(0.0, f64::max))
}

/// `W − (1/n)𝟙𝟙ᵀ`.
pub fn deflated(w: &Mat) -> Mat {
    let n = w.rows();
    let mut out = w.clone();
    for i in 0..n {
        for j in 0..w.cols() {
            out[(i, j)] -= 1.0 / n as f64;
        }
    }
    out
}

/// `‖Wω − 𝟙ω̄‖ ≤ ρ_w ‖ω − 𝟙ω̄‖` for one `ω`.
pub fn mixing_contraction_check(w: &Mat, rho_w: f64, omega: &Mat) -> OracleReport {
    let lhs = w.matmul(omega).deviation_sq().sqrt();
    let rhs = rho_w * omega.deviation_sq().sqrt();
    OracleReport::at_most("mixing_contraction", lhs, rhs * (1.0 + 1e-12) + 1e-14)
}

/// `‖∇F(x̄) − h(x)‖ ≤ (L/√n)‖x − 𝟙x̄‖`, with `h(x)` the average of each agent's
/// gradient at its own row and `L` a common smoothness constant.
pub fn lemma_lipschitz_check<O: Objective>(objectives: &[O], x: &Mat, smoothness: f64) -> Result<OracleReport, OracleError> {
    let n = objectives.len();
    if n == 0 || x.rows() != n {
        return Err(OracleError::InvalidInput(format!(
            "{} objectives for {} rows",
            n,
            x.rows()
        )));
    }
    let mean = x.row_mean();
    let d = x.cols();
    let mut at_mean = vec![0.0; d];
    let mut at_rows = vec![0.0; d];
    for (i, obj) in objectives.iter().enumerate() {
        for (a, g) in at_mean.iter_mut().zip(obj.true_grad(&mean)?) {
            *a += g / n as f64;
        }
        for (a, g) in at_rows.iter_mut().zip(obj.true_grad(x.row(i))?) {
            *a += g / n as f64;
        }
    }
    let diff: Vec<f64> = at_mean.iter().zip(&at_rows).map(|(a, b)| a - b).collect();
    let lhs = norm(&diff);
    let rhs = smoothness / (n as f64).sqrt() * x.deviation_sq().sqrt();
    Ok(OracleReport::at_most("lipschitz_mismatch", lhs, rhs * (1.0 + 1e-12) + 1e-12))
}

/// Finite-horizon proxy for summability of `Σ η_kγ_k·consensus_k` and
/// `Σ consensus_k`: the last decade of `k` must contribute less than
/// [`TAIL_SHARE_LIMIT`] of each partial sum.
pub fn consensus_summability_check(series: &[MetricsRow], schedule: &StepSchedule) -> Result<OracleReport, OracleError> {
    if series.len() < MIN_SUMMABILITY_LEN {
        return Err(OracleError::InsufficientData {
            len: series.len(),
            min: MIN_SUMMABILITY_LEN,
        });
    }
    let k_last = series.last().map_or(0, |r| r.k);
    let tail_start = k_last / 10;
    let mut totals = [0.0f64; 2];
    let mut tails = [0.0f64; 2];
    for row in series {
        let weighted = schedule.eta(row.k) * schedule.gamma(row.k) * row.consensus_err;
        let terms = [weighted, row.consensus_err];
        for j in 0..2 {
            totals[j] += terms[j];
            if row.k > tail_start {
                tails[j] += terms[j];
            }
        }
    }
    let share = |j: usize| if totals[j] > 0.0 { tails[j] / totals[j] } else { 0.0 };
    let measured = share(0).max(share(1));
    Ok(OracleReport::at_most("consensus_summability", measured, TAIL_SHARE_LIMIT))
}

/// Norm-squared bound for one-point estimates on a logistic objective:
/// `E‖g‖² ≤ 2σ₄²(μ + L′(R + γσ₄)²) + σ₄²σ₂` for `‖x‖ ≤ R`, where `μ = f(0)²` and
/// `L′ = E[L_ξ²]` is estimated from `u` draws with `L_ξ` the Lipschitz constant
/// of the sample loss on the ball of radius `R + γσ₄`.
pub fn one_point_norm_bound_check(
    obj: &LogisticObjective,
    x: &[f64],
    gamma: f64,
    trials: usize,
    rng: &mut SimRng,
) -> Result<OracleReport, OracleError> {
    if trials == 0 {
        return Err(OracleError::InvalidInput("trials must be positive".into()));
    }
    let d = x.len();
    let (_, sigma4) = bernoulli_moments(d);
    let radius = norm(x);
    let shard = obj.shard();
    let noise = obj.noise();

    let mut measured = 0.0;
    for _ in 0..trials {
        measured += norm_sq(&one_point(obj, x, gamma, rng)?.g);
    }
    measured /= trials as f64;

    let f0 = 0.5 * shard.len() as f64 * obj.inv_m();
    let mu = f0 * f0;
    let feature_norms: Vec<f64> = shard.features().rows_iter().map(norm).collect();
    let ball = radius + gamma * sigma4;
    let draws = trials.min(2_000);
    let mut l_prime = 0.0;
    for _ in 0..draws {
        let l_xi: f64 = feature_norms
            .iter()
            .map(|xn| gaussian(1.0, noise.u_sigma, rng).abs() * xn / 4.0)
            .sum::<f64>()
            * obj.inv_m()
            + 2.0 * obj.reg() * ball;
        l_prime += l_xi * l_xi;
    }
    l_prime /= draws as f64;
    let s4sq = sigma4 * sigma4;
    let bound = 2.0 * s4sq * (mu + l_prime * ball * ball) + s4sq * noise.sigma2();
    Ok(OracleReport::at_most("one_point_norm_sq", measured, bound))
}
