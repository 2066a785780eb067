use rand::Rng;

use super::{
    consensus_summability_check, deflated, dense_spectral_norm, finite_diff_grad, lemma_lipschitz_check,
    mixing_contraction_check, OracleError, OracleReport,
};
use crate::engine::{MetricsRow, StepSchedule};
use crate::estimators::bias_characterize;
use crate::linalg::{norm, Mat};
use crate::objectives::{logistic_objective, partition, quadratic_objective, two_gaussians, NoiseModel, Objective};
use crate::rng::{rng_for, Stream};
use crate::topology::{gen_erdos_renyi, laplacian_weights, spectral_gap, validate_mixing};

/// Built-in self-checks exercised by the `oracle-suite` command.
pub fn run_oracle_suite(seed: u64) -> Result<Vec<OracleReport>, OracleError> {
    let mut reports = Vec::new();
    let mut rng = rng_for(seed, Stream::Oracle, 0);

    for (idx, &(n, p)) in [(8, 0.5), (16, 0.3), (31, 0.3), (64, 0.2)].iter().enumerate() {
        let g = gen_erdos_renyi(n, p, seed.wrapping_add(idx as u64))
            .map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let w = laplacian_weights(&g).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let report = validate_mixing(w.matrix(), Some(&g));
        reports.push(OracleReport::new(
            format!("mixing_invariants_n{n}"),
            report.failures().len() as f64,
            0.0,
            0.0,
        ));
        let power = spectral_gap(w.matrix()).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let dense = dense_spectral_norm(&deflated(w.matrix()))?;
        reports.push(OracleReport::new(format!("spectral_gap_n{n}"), power, dense, 1e-8));
        let omega = Mat::from_vec(n, 3, (0..n * 3).map(|_| rng.random::<f64>() - 0.5).collect());
        let mut c = mixing_contraction_check(w.matrix(), w.rho_w(), &omega);
        c.name = format!("mixing_contraction_n{n}");
        reports.push(c);
    }

    let data = two_gaussians(400, 6, 2.0, &mut rng);
    let shards = partition(&data, 4, seed)?;
    let logistic: Vec<_> = shards
        .into_iter()
        .map(|s| logistic_objective(s, 400, 0.1, 4, NoiseModel::new(1.0, 0.01).unwrap()))
        .collect::<Result<_, _>>()?;
    let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let fd = finite_diff_grad(&logistic[0], &x, 1e-5)?;
    let exact = logistic[0].true_grad(&x)?;
    let err: Vec<f64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
    reports.push(OracleReport::at_most(
        "finite_difference_logistic",
        norm(&err),
        1e-5 * norm(&exact),
    ));

    let l = logistic.iter().map(Objective::smoothness).fold(0.0, f64::max);
    let spread = Mat::from_vec(4, 6, (0..24).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect());
    reports.push(lemma_lipschitz_check(&logistic, &spread, l)?);

    let quad = quadratic_objective(vec![0.0; 4], NoiseModel::new(0.1, 0.0).unwrap());
    let bias = bias_characterize(&quad, &[1.0, 0.0, -0.5, 0.25], 0.1, 100_000, &mut rng)?;
    reports.push(OracleReport::at_most(
        "quadratic_bias_zero",
        bias.measured_bias,
        4.0 * bias.standard_error,
    ));

    let schedule = StepSchedule::new(1.5, 3.5, 0.51, 0.17).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
    let series: Vec<MetricsRow> = (0..10_000)
        .map(|k| MetricsRow {
            k,
            eta: schedule.eta(k),
            gamma: schedule.gamma(k),
            loss: 0.0,
            consensus_err: (k as f64 + 1.0).powf(-1.3),
            tracking_err: 0.0,
            grad_norm_sq: 0.0,
            accuracy: None,
        })
        .collect();
    let mut s = consensus_summability_check(&series, &schedule)?;
    s.name = "summability_p_series".into();
    reports.push(s);

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let reports = run_oracle_suite(2024).unwrap();
        assert!(reports.len() >= 15);
        for r in &reports {
            assert!(r.pass, "{r}");
        }
    }
}
