use super::{gaussian, Dataset, NoiseModel, Objective, ObjectiveError};
use crate::linalg::{dot, norm_sq};
use crate::rng::SimRng;

/// `max_s |d²/ds² (1 + eˢ)⁻¹| = 1/(6√3)`.
pub const SIGMOID_CURVATURE_MAX: f64 = 0.096_225_044_864_937_63;

/// Sigmoid loss of one agent's shard:
///
/// `F_i(θ) = (1/m_total) Σ_j 1/(1 + exp(u_j y_j X_jᵀθ)) + (c/n) ‖θ‖²`
///
/// The loss is small when `y_j X_jᵀθ` is large. Queries redraw every `u_j`
/// and add one `ζ`; the expectation and gradient use `u = 1`.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    shard: Dataset,
    inv_m: f64,
    reg: f64,
    noise: NoiseModel,
    smoothness: f64,
}

pub fn logistic_objective(
    shard: Dataset,
    m_total: usize,
    c: f64,
    n_agents: usize,
    noise: NoiseModel,
) -> Result<LogisticObjective, ObjectiveError> {
    if shard.is_empty() {
        return Err(ObjectiveError::InvalidDataset("empty shard".into()));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(ObjectiveError::InvalidParameter(format!("regularization c = {c} must be >= 0")));
    }
    if m_total == 0 || n_agents == 0 {
        return Err(ObjectiveError::InvalidParameter("m_total and n_agents must be positive".into()));
    }
    let inv_m = 1.0 / m_total as f64;
    let reg = c / n_agents as f64;
    let trace: f64 = shard.features().rows_iter().map(norm_sq).sum();
    let smoothness = SIGMOID_CURVATURE_MAX * inv_m * trace + 2.0 * reg;
    Ok(LogisticObjective {
        shard,
        inv_m,
        reg,
        noise,
        smoothness,
    })
}

/// `1/(1 + eˢ)`.
#[inline]
fn loss_term(s: f64) -> f64 {
    1.0 / (1.0 + s.exp())
}

impl LogisticObjective {
    pub fn shard(&self) -> &Dataset {
        &self.shard
    }

    /// Normalizer `1/m_total` applied to the shard sum.
    pub fn inv_m(&self) -> f64 {
        self.inv_m
    }

    /// Per-agent regularization weight `c/n`.
    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Sample value `f_i(θ, ξ)` for an explicit draw of the `u` factors.
    pub fn value_with_u(&self, theta: &[f64], u: &[f64]) -> Result<f64, ObjectiveError> {
        self.check_dim(theta)?;
        let sum: f64 = self
            .shard
            .samples()
            .zip(u)
            .map(|((x, y), &uj)| loss_term(uj * y * dot(x, theta)))
            .sum();
        Ok(self.inv_m * sum + self.reg * norm_sq(theta))
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.shard.dim()
    }

    fn query(&self, theta: &[f64], rng: &mut SimRng) -> Result<f64, ObjectiveError> {
        self.check_dim(theta)?;
        let u_sigma = self.noise.u_sigma;
        let sum: f64 = self
            .shard
            .samples()
            .map(|(x, y)| {
                let u = gaussian(1.0, u_sigma, rng);
                loss_term(u * y * dot(x, theta))
            })
            .sum();
        Ok(self.inv_m * sum + self.reg * norm_sq(theta) + self.noise.draw_zeta(rng))
    }

    fn expected_value(&self, theta: &[f64]) -> Result<f64, ObjectiveError> {
        self.check_dim(theta)?;
        let sum: f64 = self.shard.samples().map(|(x, y)| loss_term(y * dot(x, theta))).sum();
        Ok(self.inv_m * sum + self.reg * norm_sq(theta))
    }

    fn true_grad(&self, theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check_dim(theta)?;
        let mut grad: Vec<f64> = theta.iter().map(|t| 2.0 * self.reg * t).collect();
        for (x, y) in self.shard.samples() {
            let s = y * dot(x, theta);
            let l = loss_term(s);
            // d/dθ (1 + e^s)⁻¹ = −l(1 − l) · y x
            let coeff = -self.inv_m * l * (1.0 - l) * y;
            for (g, xj) in grad.iter_mut().zip(x) {
                *g += coeff * xj;
            }
        }
        Ok(grad)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// Fraction of samples with `sign(Xᵀθ) = y`, predicting `+1` when `Xᵀθ ≥ 0`.
pub fn classification_accuracy(theta: &[f64], data: &Dataset) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let correct = data
        .samples()
        .filter(|(x, y)| {
            let pred = if dot(x, theta) >= 0.0 { 1.0 } else { -1.0 };
            pred == *y
        })
        .count();
    correct as f64 / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::objectives::two_gaussians;
    use crate::rng::rng_from_seed;

    fn sample_shard() -> Dataset {
        let mut rng = rng_from_seed(17);
        two_gaussians(25, 3, 1.0, &mut rng)
    }

    #[test]
    fn value_at_origin_is_half_per_sample() {
        let shard = sample_shard();
        let f = logistic_objective(shard, 100, 0.0, 4, NoiseModel::off()).unwrap();
        let mut rng = rng_from_seed(0);
        assert!((f.query(&[0.0; 3], &mut rng).unwrap() - 25.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_origin() {
        let shard = sample_shard();
        let f = logistic_objective(shard.clone(), 100, 0.0, 4, NoiseModel::off()).unwrap();
        let mut expected = [0.0; 3];
        for (x, y) in shard.samples() {
            for (e, xj) in expected.iter_mut().zip(x) {
                *e += 0.25 * (-y * xj) / 100.0;
            }
        }
        // central differences of the expectation, step 1e-5
        let h = 1e-5;
        let g = f.true_grad(&[0.0; 3]).unwrap();
        for j in 0..3 {
            let mut p = [0.0; 3];
            let mut q = [0.0; 3];
            p[j] = h;
            q[j] = -h;
            let fd = (f.expected_value(&p).unwrap() - f.expected_value(&q).unwrap()) / (2.0 * h);
            assert!((fd - expected[j]).abs() < 1e-9);
            assert!((g[j] - expected[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn saturates_for_correct_large_margin() {
        let shard = Dataset::new(Mat::from_rows(&[vec![1.0, 0.0]]), vec![1.0]).unwrap();
        let f = logistic_objective(shard, 1, 0.0, 1, NoiseModel::off()).unwrap();
        let v = f.expected_value(&[30.0, 0.0]).unwrap();
        assert!((v - 1.0 / (1.0 + 30f64.exp())).abs() < 1e-25);
        assert!(v < 1e-12);
    }

    #[test]
    fn regularizer_split_across_agents() {
        let shard = Dataset::new(Mat::from_rows(&[vec![0.0, 0.0]]), vec![1.0]).unwrap();
        let f = logistic_objective(shard, 1, 0.5, 5, NoiseModel::off()).unwrap();
        // 1/2 from the loss term plus (0.5/5)·‖(1,2)‖²
        assert!((f.expected_value(&[1.0, 2.0]).unwrap() - (0.5 + 0.1 * 5.0)).abs() < 1e-15);
        assert_eq!(f.true_grad(&[1.0, 2.0]).unwrap(), vec![0.2, 0.4]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty = Dataset::new(Mat::zeros(0, 2), vec![]).unwrap();
        assert!(logistic_objective(empty, 1, 0.0, 1, NoiseModel::off()).is_err());
        assert!(logistic_objective(sample_shard(), 1, -1.0, 1, NoiseModel::off()).is_err());
        let f = logistic_objective(sample_shard(), 25, 0.0, 1, NoiseModel::off()).unwrap();
        assert!(matches!(
            f.expected_value(&[0.0; 2]),
            Err(ObjectiveError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn noisy_query_mean_matches_expectation() {
        let f = logistic_objective(sample_shard(), 25, 0.1, 1, NoiseModel::new(1.0, 0.0).unwrap()).unwrap();
        let theta = [0.3, -0.2, 0.5];
        let mut rng = rng_from_seed(21);
        let trials = 100_000;
        let mean = (0..trials).map(|_| f.query(&theta, &mut rng).unwrap()).sum::<f64>() / trials as f64;
        let target = f.expected_value(&theta).unwrap();
        assert!((mean - target).abs() <= 3.0 / (trials as f64).sqrt());
    }

    #[test]
    fn accuracy_tie_goes_positive() {
        let data = Dataset::new(Mat::from_rows(&[vec![0.0], vec![1.0], vec![-1.0]]), vec![1.0, 1.0, -1.0]).unwrap();
        assert_eq!(classification_accuracy(&[0.0], &data), 2.0 / 3.0);
        assert_eq!(classification_accuracy(&[1.0], &data), 1.0);
    }
}
