use super::{NoiseModel, Objective, ObjectiveError};
use crate::linalg::{dot, norm_sq};
use crate::rng::SimRng;

/// `F(x) = ½‖x − center‖²`; queries add `ζ` only. Hessian is the identity.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    center: Vec<f64>,
    noise: NoiseModel,
}

pub fn quadratic_objective(center: Vec<f64>, noise: NoiseModel) -> QuadraticObjective {
    QuadraticObjective { center, noise }
}

impl QuadraticObjective {
    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn query(&self, x: &[f64], rng: &mut SimRng) -> Result<f64, ObjectiveError> {
        Ok(self.expected_value(x)? + self.noise.draw_zeta(rng))
    }

    fn expected_value(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        self.check_dim(x)?;
        Ok(0.5 * x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>())
    }

    fn true_grad(&self, x: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check_dim(x)?;
        Ok(x.iter().zip(&self.center).map(|(a, c)| a - c).collect())
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// Affine `F(x) = aᵀx + b`. With `a = 0` this is the constant objective.
#[derive(Clone, Debug)]
pub struct LinearObjective {
    slope: Vec<f64>,
    offset: f64,
    noise: NoiseModel,
}

impl LinearObjective {
    pub fn new(slope: Vec<f64>, offset: f64, noise: NoiseModel) -> Self {
        LinearObjective { slope, offset, noise }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        LinearObjective::new(vec![0.0; dim], value, NoiseModel::off())
    }
}

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn query(&self, x: &[f64], rng: &mut SimRng) -> Result<f64, ObjectiveError> {
        Ok(self.expected_value(x)? + self.noise.draw_zeta(rng))
    }

    fn expected_value(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        self.check_dim(x)?;
        Ok(dot(&self.slope, x) + self.offset)
    }

    fn true_grad(&self, x: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check_dim(x)?;
        Ok(self.slope.clone())
    }

    fn smoothness(&self) -> f64 {
        0.0
    }

    fn lower_bound(&self) -> f64 {
        if norm_sq(&self.slope) == 0.0 {
            self.offset
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn quadratic_at_center_is_zero() {
        let q = quadratic_objective(vec![1.0, -2.0, 0.5], NoiseModel::off());
        let mut rng = rng_from_seed(1);
        assert_eq!(q.query(&[1.0, -2.0, 0.5], &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_gradient_unit_offset() {
        let q = quadratic_objective(vec![1.0, -2.0], NoiseModel::off());
        assert_eq!(q.true_grad(&[2.0, -2.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn quadratic_noisy_query_mean() {
        let sigma = 0.7;
        let q = quadratic_objective(vec![0.0, 0.0], NoiseModel::new(sigma, 0.0).unwrap());
        let x = [1.0, 2.0];
        let mut rng = rng_from_seed(11);
        let trials = 100_000;
        let mean = (0..trials).map(|_| q.query(&x, &mut rng).unwrap()).sum::<f64>() / trials as f64;
        assert!((mean - 2.5).abs() <= 3.0 * sigma / (trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn dimension_mismatch() {
        let q = quadratic_objective(vec![0.0; 3], NoiseModel::off());
        assert!(matches!(
            q.true_grad(&[1.0]),
            Err(ObjectiveError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn linear_gradient_is_slope() {
        let f = LinearObjective::new(vec![2.0, -1.0], 3.0, NoiseModel::off());
        assert_eq!(f.expected_value(&[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(f.true_grad(&[5.0, 5.0]).unwrap(), vec![2.0, -1.0]);
        assert_eq!(LinearObjective::constant(2, 4.0).lower_bound(), 4.0);
    }
}
