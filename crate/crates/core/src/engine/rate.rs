use super::schedule::{validate_schedule_for_rate, StepSchedule};
use super::EngineError;

/// Quantities entering the finite-horizon rate bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RateInputs {
    /// `F(x̄₀) − F*` (or an upper bound on it).
    pub delta0: f64,
    /// Smoothness constant `L`.
    pub smoothness: f64,
    pub n: usize,
    pub rho_w: f64,
    /// Hessian norm bound `σ₁`.
    pub sigma1: f64,
    pub sigma3: f64,
    pub sigma4: f64,
    pub schedule: StepSchedule,
    /// `‖x₀ − 𝟙x̄₀‖²`.
    pub x0_consensus_err: f64,
    /// Bound `M̄` on `‖ḡ_k‖²`.
    pub mbar: f64,
    /// Bound `G²` on `‖y_k − 𝟙ȳ_k‖²`.
    pub tracking_bound_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub mbar: f64,
    /// `G`, the square root of the tracking-error bound.
    pub g: f64,
}

pub fn rate_constants(inp: &RateInputs) -> Result<RateConstants, EngineError> {
    let s = &inp.schedule;
    validate_schedule_for_rate(s.v1, s.v2).map_err(EngineError::InvalidSchedule)?;
    if !(inp.rho_w >= 0.0 && inp.rho_w < 1.0) {
        return Err(EngineError::InvalidParameter(format!("rho_w = {} must lie in [0, 1)", inp.rho_w)));
    }
    if inp.n == 0 || inp.sigma3 <= 0.0 {
        return Err(EngineError::InvalidParameter("n and sigma3 must be positive".into()));
    }
    let n = inp.n as f64;
    let l = inp.smoothness;
    let rho2 = inp.rho_w * inp.rho_w;
    let g_sq = inp.tracking_bound_sq;

    let a1 = 2.0 / (inp.sigma3 * s.eta0 * s.gamma0) * inp.delta0
        + 4.0 * l * l / n / (1.0 - rho2) * inp.x0_consensus_err;
    let a2 = inp.sigma4.powi(6) * inp.sigma1 * inp.sigma1 / (2.0 * inp.sigma3 * inp.sigma3)
        * s.gamma0
        * s.gamma0
        * (s.v1 + 3.0 * s.v2);
    let a3 = 2.0 * l * inp.mbar * s.eta0 / (inp.sigma3 * s.gamma0) * s.v1;
    let a4 = 12.0 * l * l * g_sq * s.eta0 * s.eta0 / n * rho2 * (1.0 + rho2) / ((1.0 - rho2) * (1.0 - rho2)) * s.v1;

    Ok(RateConstants {
        a1,
        a2,
        a3,
        a4,
        mbar: inp.mbar,
        g: g_sq.sqrt(),
    })
}

/// Upper bound on `Σ_{k≤K} η_kγ_k‖∇F(x̄_k)‖² / Σ_{k≤K} η_kγ_k`.
pub fn rate_bound(c: &RateConstants, horizon: usize, v1: f64, v2: f64) -> Result<f64, EngineError> {
    if horizon == 0 {
        return Err(EngineError::InvalidParameter("horizon K must be >= 1".into()));
    }
    let exponent = 1.0 - v1 - v2;
    let denominators = [
        ("1 - v1 - v2", exponent),
        ("v1 + 3 v2 - 1", v1 + 3.0 * v2 - 1.0),
        ("2 v1 - 1", 2.0 * v1 - 1.0),
        ("3 v1 - 1", 3.0 * v1 - 1.0),
    ];
    if let Some((name, value)) = denominators.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(EngineError::DivisionDomain(format!("{name} = {value} is not positive")));
    }
    let horizon_factor = exponent / ((horizon as f64 + 2.0).powf(exponent) - 1.0);
    Ok(horizon_factor
        * (c.a1 + c.a2 / denominators[1].1 + c.a3 / denominators[2].1 + c.a4 / denominators[3].1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> RateInputs {
        RateInputs {
            delta0: 0.4,
            smoothness: 0.3,
            n: 31,
            rho_w: 0.6,
            sigma1: 0.3,
            sigma3: 0.1,
            sigma4: 1.0,
            schedule: StepSchedule::new(1.5, 3.5, 0.51, 0.17).unwrap(),
            x0_consensus_err: 10.0,
            mbar: 0.2,
            tracking_bound_sq: 40.0,
        }
    }

    #[test]
    fn full_mixing_zeroes_a4() {
        let c = rate_constants(&RateInputs { rho_w: 0.0, ..inputs() }).unwrap();
        assert_eq!(c.a4, 0.0);
    }

    #[test]
    fn consensus_start_and_zero_gap_zeroes_a1() {
        let c = rate_constants(&RateInputs {
            delta0: 0.0,
            x0_consensus_err: 0.0,
            ..inputs()
        })
        .unwrap();
        assert_eq!(c.a1, 0.0);
    }

    #[test]
    fn a2_direct_formula() {
        let inp = inputs();
        let c = rate_constants(&inp).unwrap();
        let expected = (0.3 * 0.3 / (2.0 * 0.01)) * 3.5 * 3.5 * 1.02;
        assert!((c.a2 - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn a1_a3_a4_direct_formula() {
        let c = rate_constants(&inputs()).unwrap();
        let a1 = 2.0 / (0.1 * 1.5 * 3.5) * 0.4 + 4.0 * 0.09 / 31.0 / (1.0 - 0.36) * 10.0;
        let a3 = 2.0 * 0.3 * 0.2 * 1.5 / (0.1 * 3.5) * 0.51;
        let a4 = 12.0 * 0.09 * 40.0 * 2.25 / 31.0 * 0.36 * 1.36 / (0.64 * 0.64) * 0.51;
        assert!((c.a1 - a1).abs() <= 1e-12 * a1);
        assert!((c.a3 - a3).abs() <= 1e-12 * a3);
        assert!((c.a4 - a4).abs() <= 1e-12 * a4);
        assert!((c.g - 40f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_boundary_schedule_and_bad_gap() {
        let mut inp = inputs();
        inp.schedule.v1 = 0.75;
        inp.schedule.v2 = 0.25;
        assert!(matches!(rate_constants(&inp), Err(EngineError::InvalidSchedule(_))));
        assert!(rate_constants(&RateInputs { rho_w: 1.0, ..inputs() }).is_err());
    }

    #[test]
    fn zero_constants_zero_bound() {
        let c = RateConstants {
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            a4: 0.0,
            mbar: 0.0,
            g: 0.0,
        };
        for k in [1, 10, 1000] {
            assert_eq!(rate_bound(&c, k, 0.51, 0.17).unwrap(), 0.0);
        }
    }

    #[test]
    fn horizon_factor_value() {
        let c = RateConstants {
            a1: 1.0,
            a2: 0.0,
            a3: 0.0,
            a4: 0.0,
            mbar: 0.0,
            g: 0.0,
        };
        let expected = 0.32 / ((1e6f64 + 2.0).powf(0.32) - 1.0);
        let got = rate_bound(&c, 1_000_000, 0.51, 0.17).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn bound_decreases_in_horizon() {
        let c = rate_constants(&inputs()).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1, 2, 5, 10, 100, 10_000, 1_000_000] {
            let b = rate_bound(&c, k, 0.51, 0.17).unwrap();
            assert!(b > 0.0 && b < prev);
            prev = b;
        }
    }

    #[test]
    fn division_domain() {
        let c = rate_constants(&inputs()).unwrap();
        assert!(matches!(rate_bound(&c, 10, 0.5, 0.5), Err(EngineError::DivisionDomain(_))));
        assert!(matches!(rate_bound(&c, 10, 0.5, 0.3), Err(EngineError::DivisionDomain(_))));
        assert!(rate_bound(&c, 0, 0.51, 0.17).is_err());
    }
}
