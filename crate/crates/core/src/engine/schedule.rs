use std::fmt;

use super::EngineError;

/// Exponent conditions under which `η_k = η₀(1+k)^{−υ₁}`, `γ_k = γ₀(1+k)^{−υ₂}`
/// satisfy `Σηγ = ∞`, `Σηγ³ < ∞`, `Ση² < ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleViolation {
    /// `0 < υ₁ + υ₂` fails.
    SumNotPositive,
    /// `υ₁ + υ₂ ≤ 1` fails.
    SumAboveOne,
    /// `υ₁ + 3υ₂ > 1` fails.
    CubicNotSummable,
    /// `υ₁ > 1/2` fails.
    DescentNotSquareSummable,
    /// `υ₁ + υ₂ < 1`, required for the rate bound, fails.
    SumNotBelowOne,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleViolation::SumNotPositive => "v1 + v2 must be > 0",
            ScheduleViolation::SumAboveOne => "v1 + v2 must be <= 1 (sum of eta*gamma must diverge)",
            ScheduleViolation::CubicNotSummable => "v1 + 3*v2 must be > 1 (sum of eta*gamma^3 must converge)",
            ScheduleViolation::DescentNotSquareSummable => "v1 must be > 0.5 (sum of eta^2 must converge)",
            ScheduleViolation::SumNotBelowOne => "v1 + v2 must be < 1 for the rate bound",
        })
    }
}

/// Checks the step-size exponent conditions, returning every violated one.
pub fn validate_schedule(v1: f64, v2: f64) -> Result<(), Vec<ScheduleViolation>> {
    let mut violations = Vec::new();
    if !(v1 + v2 > 0.0) {
        violations.push(ScheduleViolation::SumNotPositive);
    }
    if !(v1 + v2 <= 1.0) {
        violations.push(ScheduleViolation::SumAboveOne);
    }
    if !(v1 + 3.0 * v2 > 1.0) {
        violations.push(ScheduleViolation::CubicNotSummable);
    }
    if !(v1 > 0.5) {
        violations.push(ScheduleViolation::DescentNotSquareSummable);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// [`validate_schedule`] plus the strict `υ₁ + υ₂ < 1` needed by the rate bound.
pub fn validate_schedule_for_rate(v1: f64, v2: f64) -> Result<(), Vec<ScheduleViolation>> {
    let mut violations = validate_schedule(v1, v2).err().unwrap_or_default();
    if !(v1 + v2 < 1.0) {
        violations.push(ScheduleViolation::SumNotBelowOne);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Decaying descent step `η_k` and exploration radius `γ_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    pub eta0: f64,
    pub gamma0: f64,
    pub v1: f64,
    pub v2: f64,
}

impl StepSchedule {
    pub fn new(eta0: f64, gamma0: f64, v1: f64, v2: f64) -> Result<Self, EngineError> {
        if !(eta0 > 0.0 && eta0.is_finite() && gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(EngineError::InvalidParameter(format!(
                "eta0 and gamma0 must be positive and finite (eta0 = {eta0}, gamma0 = {gamma0})"
            )));
        }
        validate_schedule(v1, v2).map_err(EngineError::InvalidSchedule)?;
        Ok(StepSchedule { eta0, gamma0, v1, v2 })
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 * (1.0 + k as f64).powf(-self.v1)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma0 * (1.0 + k as f64).powf(-self.v2)
    }
}
