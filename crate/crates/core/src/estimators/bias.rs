use std::fmt;

use super::{bernoulli_moments, one_point, EstimatorError};
use crate::linalg::norm;
use crate::objectives::Objective;
use crate::rng::SimRng;

pub const MIN_BIAS_TRIALS: usize = 10_000;
/// Pass thresholds sit this many standard errors above the analytic bound.
pub const BIAS_SE_MULTIPLIER: f64 = 4.0;

/// Monte-Carlo characterization of the one-point estimator's bias at `x`.
#[derive(Clone, Debug)]
pub struct BiasReport {
    pub gamma: f64,
    pub trials: usize,
    /// Sample mean of `g = z · f̃(x + γz)`.
    pub empirical_mean: Vec<f64>,
    /// `σ₃γ∇F(x)`.
    pub predicted_mean: Vec<f64>,
    /// `‖empirical_mean/(σ₃γ) − ∇F(x)‖`.
    pub measured_bias: f64,
    /// Standard error of `measured_bias` (norm of per-coordinate standard errors
    /// of `empirical_mean/(σ₃γ)`).
    pub standard_error: f64,
    /// `γσ₄³σ₁/(2σ₃)`.
    pub bias_bound: f64,
    pub pass: bool,
}

impl BiasReport {
    /// Whether the measured bias is statistically indistinguishable from zero.
    pub fn consistent_with_zero(&self) -> bool {
        self.measured_bias <= BIAS_SE_MULTIPLIER * self.standard_error
    }
}

impl fmt::Display for BiasReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gamma={} trials={} measured_bias={:e} se={:e} bound={:e} {}",
            self.gamma,
            self.trials,
            self.measured_bias,
            self.standard_error,
            self.bias_bound,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

pub fn bias_characterize<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    gamma: f64,
    trials: usize,
    rng: &mut SimRng,
) -> Result<BiasReport, EstimatorError> {
    if trials < MIN_BIAS_TRIALS {
        return Err(EstimatorError::TooFewTrials {
            min: MIN_BIAS_TRIALS,
            got: trials,
        });
    }
    let d = x.len();
    let (sigma3, sigma4) = bernoulli_moments(d);
    let grad = obj.true_grad(x)?;

    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..trials {
        let g = one_point(obj, x, gamma, rng)?.g;
        for ((s, q), v) in sum.iter_mut().zip(&mut sum_sq).zip(&g) {
            *s += v;
            *q += v * v;
        }
    }
    let t = trials as f64;
    let scale = sigma3 * gamma;
    let empirical_mean: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let se_sq: f64 = empirical_mean
        .iter()
        .zip(&sum_sq)
        .map(|(m, q)| ((q / t - m * m).max(0.0) / (t - 1.0)) / (scale * scale))
        .sum();
    let deviation: Vec<f64> = empirical_mean
        .iter()
        .zip(&grad)
        .map(|(m, g)| m / scale - g)
        .collect();
    let measured_bias = norm(&deviation);
    let standard_error = se_sq.sqrt();
    let bias_bound = gamma * sigma4.powi(3) * obj.smoothness() / (2.0 * sigma3);
    Ok(BiasReport {
        gamma,
        trials,
        predicted_mean: grad.iter().map(|g| scale * g).collect(),
        empirical_mean,
        measured_bias,
        standard_error,
        bias_bound,
        pass: measured_bias <= bias_bound + BIAS_SE_MULTIPLIER * standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{logistic_objective, quadratic_objective, two_gaussians, LinearObjective, NoiseModel};
    use crate::rng::rng_from_seed;

    /// Exact `E_z[z F(x + γz)]` by enumerating all `2^d` sign patterns.
    fn exact_mean<O: Objective>(obj: &O, x: &[f64], gamma: f64) -> Vec<f64> {
        let d = x.len();
        let s = 1.0 / (d as f64).sqrt();
        let mut mean = vec![0.0; d];
        for mask in 0..(1u32 << d) {
            let z: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { s } else { -s }).collect();
            let p: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + gamma * b).collect();
            let f = obj.expected_value(&p).unwrap();
            for (m, zj) in mean.iter_mut().zip(&z) {
                *m += zj * f;
            }
        }
        let count = f64::from(1u32 << d);
        mean.iter_mut().for_each(|m| *m /= count);
        mean
    }

    #[test]
    fn quadratic_bias_vanishes() {
        let f = quadratic_objective(vec![0.5, -0.5], NoiseModel::new(0.1, 0.0).unwrap());
        let mut rng = rng_from_seed(1);
        let r = bias_characterize(&f, &[1.0, 0.0], 0.1, 200_000, &mut rng).unwrap();
        assert!(r.consistent_with_zero(), "{r}");
        assert!(r.pass);
        // γ·σ₄³·1/(2/d) = γd/2
        assert!((r.bias_bound - 0.1).abs() < 1e-15);
    }

    #[test]
    fn quadratic_exact_enumeration_has_no_bias() {
        let f = quadratic_objective(vec![0.3, 0.1, -0.2], NoiseModel::off());
        let x = [1.0, 2.0, -1.0];
        let gamma = 0.2;
        let mean = exact_mean(&f, &x, gamma);
        let grad = f.true_grad(&x).unwrap();
        for (m, g) in mean.iter().zip(&grad) {
            assert!((m / (gamma / 3.0) - g).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_objective_has_zero_mean_and_bound() {
        let f = LinearObjective::constant(3, 2.0);
        let mut rng = rng_from_seed(2);
        let r = bias_characterize(&f, &[0.0; 3], 0.2, 50_000, &mut rng).unwrap();
        assert_eq!(r.bias_bound, 0.0);
        assert!(r.predicted_mean.iter().all(|v| *v == 0.0));
        for m in &r.empirical_mean {
            assert!(m.abs() < 4.0 * 2.0 / (3.0f64.sqrt() * 50_000f64.sqrt()));
        }
        assert!(r.pass);
    }

    #[test]
    fn logistic_bias_shrinks_with_radius() {
        let mut rng = rng_from_seed(3);
        let shard = two_gaussians(40, 3, 1.0, &mut rng);
        let f = logistic_objective(shard, 40, 0.0, 1, NoiseModel::off()).unwrap();
        let x = [0.8, -0.4, 1.1];
        let grad = f.true_grad(&x).unwrap();
        let sigma3 = 1.0 / 3.0;
        let exact_bias: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&gamma| {
                let mean = exact_mean(&f, &x, gamma);
                let dev: Vec<f64> = mean.iter().zip(&grad).map(|(m, g)| m / (sigma3 * gamma) - g).collect();
                norm(&dev)
            })
            .collect();
        // halving γ at least halves the bias
        assert!(exact_bias[1] <= 0.5 * exact_bias[0] * 1.01, "{exact_bias:?}");
        assert!(exact_bias[2] <= 0.5 * exact_bias[1] * 1.01, "{exact_bias:?}");

        for (&gamma, &exact) in [0.2, 0.1, 0.05].iter().zip(&exact_bias) {
            let r = bias_characterize(&f, &x, gamma, 200_000, &mut rng).unwrap();
            assert!(r.pass, "{r}");
            assert!(exact <= r.bias_bound);
            assert!((r.measured_bias - exact).abs() <= 4.0 * r.standard_error, "{r} exact={exact}");
        }
    }

    #[test]
    fn too_few_trials() {
        let f = LinearObjective::constant(1, 0.0);
        let mut rng = rng_from_seed(4);
        assert!(matches!(
            bias_characterize(&f, &[0.0], 0.1, 100, &mut rng),
            Err(EstimatorError::TooFewTrials { .. })
        ));
    }
}
