//! Zero-order gradient estimators built from noisy function queries, plus the
//! noisy first-order baseline.
//!
//! The one-point estimator used by the tracking algorithm is `g = z · f̃(x + γz)`
//! with no `d/γ` normalization; its expectation is `σ₃γ(∇F(x) + b)` with the
//! bias bounded by `‖b‖ ≤ γσ₄³σ₁/(2σ₃)`.

mod bias;

pub use bias::{bias_characterize, BiasReport, MIN_BIAS_TRIALS};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::objectives::{gaussian, Objective, ObjectiveError};
use crate::rng::SimRng;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("exploration radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("noise std must be nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Random direction with i.i.d. symmetric Bernoulli coordinates `±1/√d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub z: Vec<f64>,
    /// Per-coordinate second moment `E[z_j²]`.
    pub sigma3: f64,
    /// Almost-sure norm bound on `‖z‖`.
    pub sigma4: f64,
}

/// `(σ₃, σ₄)` of the Bernoulli sampler in dimension `d`.
pub fn bernoulli_moments(d: usize) -> (f64, f64) {
    (1.0 / d as f64, 1.0)
}

pub fn sample_perturbation(d: usize, rng: &mut SimRng) -> Perturbation {
    assert!(d >= 1, "perturbation dimension must be >= 1");
    let scale = 1.0 / (d as f64).sqrt();
    let z = (0..d).map(|_| if rng.random::<bool>() { scale } else { -scale }).collect();
    let (sigma3, sigma4) = bernoulli_moments(d);
    Perturbation { z, sigma3, sigma4 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub queries_used: usize,
    pub gamma_used: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimatorKind {
    /// `z · f̃(x + γz)`, the tracking algorithm's estimator.
    OnePoint,
    /// `(d/γ) · z · f̃(x + γz)`.
    OnePointNormalized,
    /// `d · (f̃(x + γz) − f̃(x − γz)) / (2γ) · z`.
    TwoPoint,
    /// `Σ_j (f̃(x + γe_j) − f̃(x − γe_j)) / (2γ) · e_j`.
    Coordinate,
    /// `∇F(x) + ε`, `ε ~ N(0, noise_sigma² I)`.
    FirstOrder { noise_sigma: f64 },
}

impl EstimatorKind {
    pub fn is_zero_order(&self) -> bool {
        !matches!(self, EstimatorKind::FirstOrder { .. })
    }

    pub fn queries_per_call(&self, d: usize) -> usize {
        match self {
            EstimatorKind::OnePoint | EstimatorKind::OnePointNormalized | EstimatorKind::FirstOrder { .. } => 1,
            EstimatorKind::TwoPoint => 2,
            EstimatorKind::Coordinate => 2 * d,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::OnePoint => f.write_str("one_point"),
            EstimatorKind::OnePointNormalized => f.write_str("one_point_normalized"),
            EstimatorKind::TwoPoint => f.write_str("two_point"),
            EstimatorKind::Coordinate => f.write_str("coordinate"),
            EstimatorKind::FirstOrder { .. } => f.write_str("first_order"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    /// Parses the estimator name; `first_order` gets a zero noise level that the
    /// caller is expected to overwrite.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one_point" => Ok(EstimatorKind::OnePoint),
            "one_point_normalized" => Ok(EstimatorKind::OnePointNormalized),
            "two_point" => Ok(EstimatorKind::TwoPoint),
            "coordinate" | "2d_point" => Ok(EstimatorKind::Coordinate),
            "first_order" => Ok(EstimatorKind::FirstOrder { noise_sigma: 0.0 }),
            other => Err(format!(
                "unknown estimator {other:?} (one_point, one_point_normalized, two_point, coordinate, first_order)"
            )),
        }
    }
}

fn check_radius(gamma: f64) -> Result<(), EstimatorError> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(EstimatorError::InvalidRadius(gamma))
    }
}

fn shifted(x: &[f64], dir: &[f64], step: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, b)| a + step * b).collect()
}

pub fn one_point<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    gamma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    check_radius(gamma)?;
    obj.check_dim(x)?;
    let p = sample_perturbation(x.len(), rng);
    let value = obj.query(&shifted(x, &p.z, gamma), rng)?;
    Ok(GradientEstimate {
        g: p.z.iter().map(|zj| zj * value).collect(),
        queries_used: 1,
        gamma_used: gamma,
    })
}

pub fn one_point_normalized<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    gamma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    let mut est = one_point(obj, x, gamma, rng)?;
    let scale = x.len() as f64 / gamma;
    est.g.iter_mut().for_each(|v| *v *= scale);
    Ok(est)
}

/// Both queries share `z` but draw their own noise.
pub fn two_point<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    gamma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    check_radius(gamma)?;
    obj.check_dim(x)?;
    let d = x.len();
    let p = sample_perturbation(d, rng);
    let plus = obj.query(&shifted(x, &p.z, gamma), rng)?;
    let minus = obj.query(&shifted(x, &p.z, -gamma), rng)?;
    let coeff = d as f64 * (plus - minus) / (2.0 * gamma);
    Ok(GradientEstimate {
        g: p.z.iter().map(|zj| coeff * zj).collect(),
        queries_used: 2,
        gamma_used: gamma,
    })
}

pub fn coordinate_2d_point<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    gamma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    check_radius(gamma)?;
    obj.check_dim(x)?;
    let d = x.len();
    let mut g = vec![0.0; d];
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + gamma;
        let plus = obj.query(&probe, rng)?;
        probe[j] = x[j] - gamma;
        let minus = obj.query(&probe, rng)?;
        probe[j] = x[j];
        g[j] = (plus - minus) / (2.0 * gamma);
    }
    Ok(GradientEstimate {
        g,
        queries_used: 2 * d,
        gamma_used: gamma,
    })
}

pub fn fo_noisy<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    noise_sigma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(EstimatorError::InvalidNoise(noise_sigma));
    }
    let mut g = obj.true_grad(x)?;
    for v in &mut g {
        *v += gaussian(0.0, noise_sigma, rng);
    }
    Ok(GradientEstimate {
        g,
        queries_used: 1,
        gamma_used: 0.0,
    })
}

/// Dispatches on `kind`. `gamma` is ignored by the first-order baseline.
pub fn estimate<O: Objective + ?Sized>(
    kind: EstimatorKind,
    obj: &O,
    x: &[f64],
    gamma: f64,
    rng: &mut SimRng,
) -> Result<GradientEstimate, EstimatorError> {
    match kind {
        EstimatorKind::OnePoint => one_point(obj, x, gamma, rng),
        EstimatorKind::OnePointNormalized => one_point_normalized(obj, x, gamma, rng),
        EstimatorKind::TwoPoint => two_point(obj, x, gamma, rng),
        EstimatorKind::Coordinate => coordinate_2d_point(obj, x, gamma, rng),
        EstimatorKind::FirstOrder { noise_sigma } => fo_noisy(obj, x, noise_sigma, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::objectives::{quadratic_objective, LinearObjective, NoiseModel};
    use crate::rng::rng_from_seed;

    #[test]
    fn perturbation_d1_is_sign() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let p = sample_perturbation(1, &mut rng);
            assert!(p.z[0] == 1.0 || p.z[0] == -1.0);
        }
    }

    #[test]
    fn perturbation_d4_unit_norm() {
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let p = sample_perturbation(4, &mut rng);
            assert!(p.z.iter().all(|&v| v == 0.5 || v == -0.5));
            assert_eq!(norm(&p.z), 1.0);
            assert_eq!((p.sigma3, p.sigma4), (0.25, 1.0));
        }
    }

    #[test]
    fn perturbation_moments() {
        let d = 10;
        let trials = 100_000;
        let mut rng = rng_from_seed(3);
        let mut second = 0.0;
        let mut mean = vec![0.0; d];
        for _ in 0..trials {
            let p = sample_perturbation(d, &mut rng);
            second += p.z[0] * p.z[0];
            for (m, z) in mean.iter_mut().zip(&p.z) {
                *m += z;
            }
        }
        assert!((second / trials as f64 - 0.1).abs() <= 0.005);
        let bound = 4.0 / ((d * trials) as f64).sqrt();
        for m in mean {
            assert!((m / trials as f64).abs() <= bound);
        }
    }

    #[test]
    fn one_point_on_constant_is_scaled_direction() {
        let c = 2.5;
        let f = LinearObjective::constant(3, c);
        let mut rng = rng_from_seed(4);
        let mut replay = rng.clone();
        let est = one_point(&f, &[0.1, 0.2, 0.3], 0.5, &mut rng).unwrap();
        let p = sample_perturbation(3, &mut replay);
        assert_eq!(est.g, p.z.iter().map(|z| c * z).collect::<Vec<_>>());
        assert_eq!(est.queries_used, 1);
    }

    #[test]
    fn one_point_zero_value_gives_zero() {
        let f = LinearObjective::constant(2, 0.0);
        let mut rng = rng_from_seed(5);
        assert_eq!(one_point(&f, &[1.0, 1.0], 0.1, &mut rng).unwrap().g, vec![0.0, 0.0]);
    }

    #[test]
    fn one_point_quadratic_mean() {
        // E[g] = σ₃γ∇F(x) = 0.5 · 0.1 · (1, 0)
        let f = quadratic_objective(vec![0.0, 0.0], NoiseModel::off());
        let mut rng = rng_from_seed(6);
        let trials = 1_000_000;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        for _ in 0..trials {
            let g = one_point(&f, &[1.0, 0.0], 0.1, &mut rng).unwrap().g;
            for j in 0..2 {
                sum[j] += g[j];
                sum_sq[j] += g[j] * g[j];
            }
        }
        let target = [0.05, 0.0];
        for j in 0..2 {
            let mean = sum[j] / trials as f64;
            let se = ((sum_sq[j] / trials as f64 - mean * mean).max(0.0) / trials as f64).sqrt();
            assert!((mean - target[j]).abs() <= 4.0 * se, "coord {j}: {mean} vs {}", target[j]);
        }
    }

    #[test]
    fn normalized_variant_scales_by_d_over_gamma() {
        let f = LinearObjective::constant(4, 1.0);
        let mut r1 = rng_from_seed(7);
        let mut r2 = rng_from_seed(7);
        let a = one_point(&f, &[0.0; 4], 0.2, &mut r1).unwrap();
        let b = one_point_normalized(&f, &[0.0; 4], 0.2, &mut r2).unwrap();
        for (x, y) in a.g.iter().zip(&b.g) {
            assert!((y - 20.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_exact_on_linear_1d() {
        let f = LinearObjective::new(vec![2.0], 0.0, NoiseModel::off());
        let mut rng = rng_from_seed(8);
        let est = two_point(&f, &[0.0], 0.5, &mut rng).unwrap();
        assert_eq!(est.g, vec![2.0]);
        assert_eq!(est.queries_used, 2);
    }

    #[test]
    fn two_point_constant_is_zero() {
        let f = LinearObjective::constant(3, 7.0);
        let mut rng = rng_from_seed(9);
        assert_eq!(two_point(&f, &[1.0, 2.0, 3.0], 0.3, &mut rng).unwrap().g, vec![0.0; 3]);
    }

    #[test]
    fn two_point_quadratic_mean_is_gradient() {
        let f = quadratic_objective(vec![0.0, 0.0], NoiseModel::off());
        let mut rng = rng_from_seed(10);
        let trials = 200_000;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        for _ in 0..trials {
            let g = two_point(&f, &[1.0, 0.0], 0.1, &mut rng).unwrap().g;
            for j in 0..2 {
                sum[j] += g[j];
                sum_sq[j] += g[j] * g[j];
            }
        }
        for (j, target) in [1.0, 0.0].into_iter().enumerate() {
            let mean = sum[j] / trials as f64;
            let se = ((sum_sq[j] / trials as f64 - mean * mean).max(0.0) / trials as f64).sqrt();
            assert!((mean - target).abs() <= 4.0 * se + 1e-12, "coord {j}: {mean}");
        }
    }

    #[test]
    fn coordinate_exact_on_linear() {
        let a = vec![1.5, -2.0, 0.25];
        let f = LinearObjective::new(a.clone(), 4.0, NoiseModel::off());
        let mut rng = rng_from_seed(11);
        for gamma in [1e-3, 0.7, 5.0] {
            let est = coordinate_2d_point(&f, &[0.3, 0.1, -0.9], gamma, &mut rng).unwrap();
            for (g, a) in est.g.iter().zip(&a) {
                assert!((g - a).abs() < 1e-9);
            }
            assert_eq!(est.queries_used, 6);
        }
    }

    #[test]
    fn coordinate_on_quadratic() {
        let f = quadratic_objective(vec![1.0, 2.0], NoiseModel::off());
        let mut rng = rng_from_seed(12);
        let at_min = coordinate_2d_point(&f, &[1.0, 2.0], 0.01, &mut rng).unwrap().g;
        assert!(at_min.iter().all(|v| v.abs() <= 1e-12));
        let g = coordinate_2d_point(&f, &[2.0, 2.0], 0.01, &mut rng).unwrap().g;
        assert!((g[0] - 1.0).abs() <= 1e-12 && g[1].abs() <= 1e-12);
    }

    #[test]
    fn fo_noisy_cases() {
        let f = quadratic_objective(vec![1.0, -1.0], NoiseModel::off());
        let mut rng = rng_from_seed(13);
        assert_eq!(fo_noisy(&f, &[2.0, 1.0], 0.0, &mut rng).unwrap().g, vec![1.0, 2.0]);
        assert_eq!(fo_noisy(&f, &[1.0, -1.0], 0.0, &mut rng).unwrap().g, vec![0.0, 0.0]);
        let sigma = 0.5;
        let trials = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..trials {
            let g = fo_noisy(&f, &[2.0, 1.0], sigma, &mut rng).unwrap().g;
            sum[0] += g[0];
            sum[1] += g[1];
        }
        let tol = 3.0 * sigma / (trials as f64).sqrt();
        assert!((sum[0] / trials as f64 - 1.0).abs() <= tol);
        assert!((sum[1] / trials as f64 - 2.0).abs() <= tol);
        assert!(fo_noisy(&f, &[0.0, 0.0], -1.0, &mut rng).is_err());
    }

    #[test]
    fn query_accounting() {
        let f = quadratic_objective(vec![0.0; 5], NoiseModel::new(0.1, 0.0).unwrap());
        let mut rng = rng_from_seed(14);
        let x = [0.5; 5];
        for (kind, expected) in [
            (EstimatorKind::OnePoint, 1),
            (EstimatorKind::OnePointNormalized, 1),
            (EstimatorKind::TwoPoint, 2),
            (EstimatorKind::Coordinate, 10),
            (EstimatorKind::FirstOrder { noise_sigma: 0.1 }, 1),
        ] {
            let est = estimate(kind, &f, &x, 0.1, &mut rng).unwrap();
            assert_eq!(est.queries_used, expected, "{kind}");
            assert_eq!(kind.queries_per_call(5), expected);
            assert!(est.g.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn bad_radius_rejected() {
        let f = LinearObjective::constant(2, 1.0);
        let mut rng = rng_from_seed(15);
        assert!(matches!(one_point(&f, &[0.0; 2], 0.0, &mut rng), Err(EstimatorError::InvalidRadius(_))));
        assert!(two_point(&f, &[0.0; 2], -1.0, &mut rng).is_err());
        assert!(coordinate_2d_point(&f, &[0.0; 2], f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn dimension_mismatch_propagates() {
        let f = LinearObjective::constant(2, 1.0);
        let mut rng = rng_from_seed(16);
        assert!(matches!(
            one_point(&f, &[0.0; 3], 0.1, &mut rng),
            Err(EstimatorError::Objective(ObjectiveError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn kind_names_roundtrip() {
        for name in ["one_point", "one_point_normalized", "two_point", "coordinate", "first_order"] {
            assert_eq!(name.parse::<EstimatorKind>().unwrap().to_string(), name);
        }
        assert!("gaussian".parse::<EstimatorKind>().is_err());
    }
}
