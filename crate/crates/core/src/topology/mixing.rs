use std::fmt;

use rand::Rng;

use super::{Graph, TopologyError};
use crate::linalg::{dot, norm, Mat};
use crate::rng::rng_from_seed;

/// Tolerance on row/column sums and symmetry after construction.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Relative residual at which power iteration stops.
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;

/// Doubly stochastic, symmetric, nonnegative agent-coupling matrix together
/// with `rho_w = ‖W − (1/n)𝟙𝟙ᵀ‖₂`.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    w: Mat,
    rho_w: f64,
}

impl MixingMatrix {
    /// Validates `w` and computes its spectral gap. Fails if any invariant
    /// does not hold.
    pub fn new(w: Mat, support: Option<&Graph>) -> Result<Self, TopologyError> {
        let report = validate_mixing(&w, support);
        if !report.passed() {
            return Err(TopologyError::InvalidParameters(format!(
                "mixing matrix rejected: {}",
                report.failures().join(", ")
            )));
        }
        Ok(MixingMatrix {
            rho_w: report.rho_w,
            w,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.w
    }

    pub fn rho_w(&self) -> f64 {
        self.rho_w
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    /// `W · m` for an agent-stacked `n × d` matrix.
    pub fn mix(&self, m: &Mat) -> Mat {
        self.w.matmul(m)
    }
}

/// `W = I − L/τ` with `L` the graph Laplacian and `τ = d_max + 1`.
pub fn laplacian_weights(g: &Graph) -> Result<MixingMatrix, TopologyError> {
    if !g.is_connected() {
        return Err(TopologyError::Disconnected);
    }
    let n = g.n();
    let tau = (g.max_degree() + 1) as f64;
    let deg = g.degrees();
    let mut w = Mat::identity(n);
    for i in 0..n {
        w[(i, i)] -= deg[i] as f64 / tau;
    }
    for (a, b) in g.edges() {
        w[(a, b)] = 1.0 / tau;
        w[(b, a)] = 1.0 / tau;
    }
    MixingMatrix::new(w, Some(g))
}

/// Largest singular value of `W − (1/n)𝟙𝟙ᵀ` by power iteration on its Gram
/// matrix, stopped once the eigen-residual is below `POWER_TOL` relative.
pub fn spectral_gap(w: &Mat) -> Result<f64, TopologyError> {
    let n = w.rows();
    if n == 0 || w.cols() != n {
        return Err(TopologyError::InvalidParameters("mixing matrix must be square and nonempty".into()));
    }
    let wt = w.transpose();
    let deflate = |m: &Mat, v: &[f64]| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / n as f64;
        m.matvec(v).into_iter().map(|x| x - mean).collect()
    };
    // B v = W v − mean(v) 𝟙, Bᵀ u = Wᵀ u − mean(u) 𝟙
    let gram = |v: &[f64]| deflate(&wt, &deflate(w, v));

    let mut rng = rng_from_seed(0x005E_ED0F_5EC7);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    for _ in 0..POWER_MAX_ITERS {
        let av = gram(&v);
        let lambda = dot(&v, &av);
        let av_norm = norm(&av);
        if av_norm < 1e-28 {
            return Ok(0.0);
        }
        let residual = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= POWER_TOL * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        v = av.into_iter().map(|x| x / av_norm).collect();
    }
    Err(TopologyError::NonConvergence(POWER_MAX_ITERS))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingCheck {
    pub name: &'static str,
    pub pass: bool,
    pub measured: f64,
}

/// Per-invariant outcome of [`validate_mixing`] with measured residuals.
#[derive(Clone, Debug)]
pub struct MixingReport {
    pub checks: Vec<MixingCheck>,
    pub max_row_sum_dev: f64,
    pub max_col_sum_dev: f64,
    pub min_entry: f64,
    pub min_diagonal: f64,
    pub symmetry_defect: f64,
    pub rho_w: f64,
}

impl MixingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }

    pub fn check(&self, name: &str) -> Option<&MixingCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for MixingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<14} {} measured={:e}",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                c.measured
            )?;
        }
        write!(f, "overall        {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

/// Checks the mixing-matrix invariants. `support`, when given, is the graph
/// whose edges (plus the diagonal) may carry positive weight.
pub fn validate_mixing(w: &Mat, support: Option<&Graph>) -> MixingReport {
    let n = w.rows();
    let mut checks = Vec::new();
    let square = n > 0 && w.cols() == n;
    checks.push(MixingCheck {
        name: "square",
        pass: square,
        measured: w.cols() as f64 - n as f64,
    });
    if !square {
        return MixingReport {
            checks,
            max_row_sum_dev: f64::NAN,
            max_col_sum_dev: f64::NAN,
            min_entry: f64::NAN,
            min_diagonal: f64::NAN,
            symmetry_defect: f64::NAN,
            rho_w: f64::NAN,
        };
    }

    let min_entry = w.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let min_diagonal = (0..n).map(|i| w[(i, i)]).fold(f64::INFINITY, f64::min);
    let max_row_sum_dev = w
        .rows_iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let max_col_sum_dev = (0..n)
        .map(|j| ((0..n).map(|i| w[(i, j)]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut symmetry_defect: f64 = 0.0;
    let mut off_support = 0usize;
    for i in 0..n {
        for j in 0..n {
            symmetry_defect = symmetry_defect.max((w[(i, j)] - w[(j, i)]).abs());
            if let Some(g) = support {
                if i != j && w[(i, j)] > 0.0 && !g.has_edge(i, j) {
                    off_support += 1;
                }
            }
        }
    }

    checks.push(MixingCheck {
        name: "nonnegative",
        pass: min_entry >= 0.0,
        measured: min_entry,
    });
    checks.push(MixingCheck {
        name: "symmetric",
        pass: symmetry_defect <= STOCHASTIC_TOL,
        measured: symmetry_defect,
    });
    checks.push(MixingCheck {
        name: "row_sums",
        pass: max_row_sum_dev <= STOCHASTIC_TOL,
        measured: max_row_sum_dev,
    });
    checks.push(MixingCheck {
        name: "column_sums",
        pass: max_col_sum_dev <= STOCHASTIC_TOL,
        measured: max_col_sum_dev,
    });
    checks.push(MixingCheck {
        name: "diagonal",
        pass: min_diagonal > 0.0,
        measured: min_diagonal,
    });
    if support.is_some() {
        checks.push(MixingCheck {
            name: "support",
            pass: off_support == 0,
            measured: off_support as f64,
        });
    }
    let rho_w = spectral_gap(w).unwrap_or(f64::NAN);
    checks.push(MixingCheck {
        name: "spectral_gap",
        pass: rho_w < 1.0 - STOCHASTIC_TOL,
        measured: rho_w,
    });

    MixingReport {
        checks,
        max_row_sum_dev,
        max_col_sum_dev,
        min_entry,
        min_diagonal,
        symmetry_defect,
        rho_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::gen_erdos_renyi;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn path_two_is_full_mixing() {
        let mm = laplacian_weights(&Graph::path(2)).unwrap();
        assert_eq!(mm.matrix(), &Mat::filled(2, 2, 0.5));
        assert!(mm.rho_w().abs() < 1e-12);
    }

    #[test]
    fn complete_three_is_uniform() {
        let mm = laplacian_weights(&Graph::complete(3)).unwrap();
        for v in mm.matrix().as_slice() {
            assert!(close(*v, 1.0 / 3.0, 1e-15));
        }
        assert!(mm.rho_w() < 1e-12);
    }

    #[test]
    fn ring_four_gap_is_one_third() {
        let mm = laplacian_weights(&Graph::ring(4)).unwrap();
        let w = mm.matrix();
        assert!(close(w[(0, 0)], 1.0 / 3.0, 1e-15));
        assert!(close(w[(0, 1)], 1.0 / 3.0, 1e-15));
        assert_eq!(w[(0, 2)], 0.0);
        assert!(close(mm.rho_w(), 1.0 / 3.0, 1e-9));
    }

    #[test]
    fn uniform_matrix_has_zero_gap() {
        for n in [2, 5, 17] {
            let j = Mat::filled(n, n, 1.0 / n as f64);
            assert!(spectral_gap(&j).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_fails_spectral_check() {
        let report = validate_mixing(&Mat::identity(4), None);
        assert!(!report.passed());
        assert_eq!(report.failures(), vec!["spectral_gap"]);
        assert!(close(report.rho_w, 1.0, 1e-10));
    }

    #[test]
    fn negative_entry_fails_nonnegativity() {
        let mut w = Mat::filled(2, 2, 0.5);
        w[(0, 1)] = -1e-3;
        w[(0, 0)] = 1.001;
        w[(1, 0)] = -1e-3;
        w[(1, 1)] = 1.001;
        let report = validate_mixing(&w, None);
        assert!(!report.check("nonnegative").unwrap().pass);
        assert!(close(report.min_entry, -1e-3, 1e-15));
    }

    #[test]
    fn row_sum_and_support_violations_reported() {
        let mut w = Mat::filled(3, 3, 1.0 / 3.0);
        w[(0, 0)] = 0.5;
        let report = validate_mixing(&w, Some(&Graph::path(3)));
        assert!(!report.check("row_sums").unwrap().pass);
        assert!(!report.check("support").unwrap().pass);
        assert!(report.max_row_sum_dev > 0.1);
    }

    #[test]
    fn laplacian_weights_pass_validation() {
        for seed in 0..25 {
            let n = 2 + (seed as usize * 7) % 40;
            let g = gen_erdos_renyi(n, 0.4, seed).unwrap();
            let mm = laplacian_weights(&g).unwrap();
            let report = validate_mixing(mm.matrix(), Some(&g));
            assert!(report.passed(), "seed {seed}: {report}");
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(laplacian_weights(&g), Err(TopologyError::Disconnected)));
    }
}
