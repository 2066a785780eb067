use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Normalization, ObjectiveKind};
use super::HarnessError;
use crate::engine::{
    global_value_and_grad, rate_bound, rate_constants, validate_schedule_for_rate, EngineError, MetricsRow,
    RateConstants, RateInputs, StepSchedule, Tracker,
};
use crate::estimators::{bernoulli_moments, bias_characterize, BiasReport, EstimatorKind};
use crate::linalg::{norm_sq, Mat};
use crate::objectives::{
    classification_accuracy, logistic_objective, partition, quadratic_objective, two_gaussians, Dataset, NoiseModel,
    Objective,
};
use crate::oracles::{
    consensus_summability_check, deflated, dense_spectral_norm, lemma_lipschitz_check, OracleReport,
    DENSE_SIZE_GUARD, MIN_SUMMABILITY_LEN,
};
use crate::rng::{derive_seed, rng_for, SimRng, Stream};
use crate::topology::{gen_erdos_renyi, laplacian_weights, validate_mixing, Graph, MixingMatrix};

type BoxedObjective = Box<dyn Objective>;

/// Instance-independent parts of an experiment.
#[derive(Debug)]
pub struct Problem {
    pub graph: Graph,
    pub mixing: MixingMatrix,
    pub train: Option<Dataset>,
    pub test: Option<Dataset>,
    /// Per-agent minimizers for the quadratic objective.
    pub centers: Option<Vec<Vec<f64>>>,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem, HarnessError> {
    let seed = cfg.algorithm.seed;
    let graph = match &cfg.graph.edges {
        Some(path) => Graph::read_edge_list(path)?,
        None => {
            let graph_seed = cfg.graph.seed.unwrap_or_else(|| derive_seed(seed, Stream::Graph, 0));
            gen_erdos_renyi(cfg.graph.n, cfg.graph.p, graph_seed)?
        }
    };
    let mixing = laplacian_weights(&graph)?;
    let obj = &cfg.objective;
    let (mut train, mut test, mut centers) = (None, None, None);
    match obj.kind {
        ObjectiveKind::Logistic => {
            let data = match &obj.train {
                Some(path) => Dataset::read(path)?,
                None => two_gaussians(obj.samples, obj.dim, obj.separation, &mut rng_for(seed, Stream::Dataset, 0)),
            };
            if data.dim() != obj.dim {
                return Err(HarnessError::Validation(vec![format!(
                    "objective: training data has dimension {}, config says dim = {}",
                    data.dim(),
                    obj.dim
                )]));
            }
            test = match &obj.test {
                Some(path) => Some(Dataset::read(path)?),
                None if obj.train.is_none() && obj.test_samples > 0 => Some(two_gaussians(
                    obj.test_samples,
                    obj.dim,
                    obj.separation,
                    &mut rng_for(seed, Stream::TestSet, 0),
                )),
                None => None,
            };
            if let Some(t) = &test {
                if t.dim() != obj.dim {
                    return Err(HarnessError::Validation(vec![format!(
                        "objective: test data has dimension {}, config says dim = {}",
                        t.dim(),
                        obj.dim
                    )]));
                }
            }
            train = Some(data);
        }
        ObjectiveKind::Quadratic => {
            let mut rng = rng_for(seed, Stream::Centers, 0);
            let normal = rand_distr::StandardNormal;
            centers = Some(
                (0..graph.n())
                    .map(|_| (0..obj.dim).map(|_| rng.sample::<f64, _>(normal)).collect())
                    .collect(),
            );
        }
    }
    Ok(Problem {
        graph,
        mixing,
        train,
        test,
        centers,
    })
}

pub fn build_objectives(cfg: &ExperimentConfig, problem: &Problem, instance: usize) -> Result<Vec<BoxedObjective>, HarnessError> {
    let obj = &cfg.objective;
    let n = problem.n();
    let mut out: Vec<BoxedObjective> = Vec::with_capacity(n);
    if let Some(data) = &problem.train {
        let noise = NoiseModel::new(obj.zeta_sigma, obj.u_sigma)?;
        let shards = partition(data, n, derive_seed(cfg.algorithm.seed, Stream::Partition, instance as u64))?;
        for shard in shards {
            let o = match obj.normalization {
                Normalization::Global => logistic_objective(shard, data.len(), obj.c, n, noise)?,
                Normalization::Local => {
                    let m = shard.len();
                    logistic_objective(shard, m, obj.c, 1, noise)?
                }
            };
            out.push(Box::new(o));
        }
    } else if let Some(centers) = &problem.centers {
        let noise = NoiseModel::new(obj.zeta_sigma, 0.0)?;
        for c in centers {
            out.push(Box::new(quadratic_objective(c.clone(), noise)));
        }
    }
    Ok(out)
}

/// Agent-stacked starting point of one instance, entries uniform on `[-1, 1]`.
pub fn initial_point(seed: u64, n: usize, dim: usize, instance: usize) -> Mat {
    let mut rng = rng_for(seed, Stream::InitialPoint, instance as u64);
    Mat::from_vec(n, dim, (0..n * dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

fn agent_rngs(seed: u64, n: usize, instance: usize) -> Vec<SimRng> {
    let base = derive_seed(seed, Stream::Instance, instance as u64);
    (0..n as u64).map(|i| rng_for(base, Stream::Agent, i)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSummary {
    pub index: usize,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub final_consensus_err: f64,
    pub final_accuracy: Option<f64>,
    /// `Σ η_kγ_k‖∇F(x̄_k)‖² / Σ η_kγ_k` over `k = 0..=K`.
    pub weighted_grad_avg: f64,
    /// Largest observed `‖ḡ_k‖²`.
    pub mbar: f64,
    /// Largest observed `‖y_k − 𝟙ȳ_k‖²`.
    pub tracking_max: f64,
    pub x0_consensus_err: f64,
    /// `F(x̄₀)` minus the objective's known lower bound.
    pub delta0: f64,
    pub guard_tripped: bool,
    pub error: Option<String>,
}

struct InstanceOutcome {
    rows: Vec<MetricsRow>,
    final_mean: Vec<f64>,
    final_x: Mat,
    summary: InstanceSummary,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    kind: EstimatorKind,
    schedule: StepSchedule,
    stride: usize,
}

fn run_instance(ctx: &Ctx<'_>, instance: usize) -> Result<InstanceOutcome, HarnessError> {
    let cfg = ctx.cfg;
    let n = ctx.problem.n();
    let objectives = build_objectives(cfg, ctx.problem, instance)?;
    let lower: f64 = objectives.iter().map(|o| o.lower_bound()).sum::<f64>() / n as f64;
    let x0 = initial_point(cfg.algorithm.seed, n, cfg.objective.dim, instance);
    let mut tracker = Tracker::new(
        &ctx.problem.mixing,
        &objectives,
        ctx.schedule,
        ctx.kind,
        agent_rngs(cfg.algorithm.seed, n, instance),
    )?
    .with_norm_guard(cfg.algorithm.norm_guard);

    let mut summary = InstanceSummary {
        index: instance,
        final_loss: f64::NAN,
        final_grad_norm_sq: f64::NAN,
        final_consensus_err: f64::NAN,
        final_accuracy: None,
        weighted_grad_avg: f64::NAN,
        mbar: 0.0,
        tracking_max: 0.0,
        x0_consensus_err: x0.deviation_sq(),
        delta0: f64::NAN,
        guard_tripped: false,
        error: None,
    };
    let mut rows = Vec::new();
    let mut state = match tracker.init(x0.clone()) {
        Ok(s) => s,
        Err(e) => {
            summary.error = Some(e.to_string());
            return Ok(InstanceOutcome {
                rows,
                final_mean: x0.row_mean(),
                final_x: x0,
                summary,
            });
        }
    };
    let horizon = cfg.algorithm.iterations;
    let (mut weighted, mut weights) = (0.0, 0.0);
    let mut last_loss = f64::NAN;
    let mut last_grad = f64::NAN;

    let result: Result<(), EngineError> = (|| {
        loop {
            let k = state.k;
            let mean = state.mean_x();
            let (loss, grad) = global_value_and_grad(&objectives, &mean)?;
            let grad_sq = norm_sq(&grad);
            let tracking = state.tracking_err();
            if k == 0 {
                summary.delta0 = loss - lower;
            }
            let w = ctx.schedule.eta(k) * ctx.schedule.gamma(k);
            weighted += w * grad_sq;
            weights += w;
            summary.mbar = summary.mbar.max(norm_sq(&state.mean_g()));
            summary.tracking_max = summary.tracking_max.max(tracking);
            last_loss = loss;
            last_grad = grad_sq;
            if k % ctx.stride == 0 || k == horizon {
                rows.push(MetricsRow {
                    k,
                    eta: ctx.schedule.eta(k),
                    gamma: ctx.schedule.gamma(k),
                    loss,
                    consensus_err: state.consensus_err(),
                    tracking_err: tracking,
                    grad_norm_sq: grad_sq,
                    accuracy: ctx.problem.test.as_ref().map(|t| classification_accuracy(&mean, t)),
                });
            }
            if k == horizon {
                return Ok(());
            }
            tracker.step(&mut state)?;
        }
    })();

    summary.guard_tripped = tracker.guard_tripped();
    summary.final_loss = last_loss;
    summary.final_grad_norm_sq = last_grad;
    summary.final_consensus_err = state.consensus_err();
    summary.weighted_grad_avg = weighted / weights;
    let final_mean = state.mean_x();
    summary.final_accuracy = ctx.problem.test.as_ref().map(|t| classification_accuracy(&final_mean, t));
    if let Err(e) = result {
        summary.error = Some(format!("instance {instance} at k = {}: {e}", state.k));
    }
    Ok(InstanceOutcome {
        rows,
        final_mean,
        final_x: state.x,
        summary,
    })
}

/// Measured versus theoretical value of `Σηγ‖∇F(x̄)‖² / Σηγ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEvaluation {
    pub constants: RateConstants,
    pub bound: f64,
    /// Mean over instances.
    pub measured: f64,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub kind: EstimatorKind,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub stride: usize,
    pub n: usize,
    pub dim: usize,
    pub edges: usize,
    pub rho_w: f64,
    /// Largest local smoothness constant.
    pub smoothness: f64,
    /// Pointwise mean over instances.
    pub series: Vec<MetricsRow>,
    /// Mean over instances of the final average iterate.
    pub final_mean: Vec<f64>,
    pub instances: Vec<InstanceSummary>,
    pub rate: Option<RateEvaluation>,
    pub oracles: Vec<OracleReport>,
    /// Set when any instance stopped early; results are partial.
    pub failure: Option<String>,
    pub config_text: String,
}

impl RunResult {
    pub fn final_row(&self) -> Option<&MetricsRow> {
        self.series.last()
    }

    /// Mean over instances of the test accuracy at `x̄_K`.
    pub fn final_accuracy(&self) -> Option<f64> {
        let acc: Vec<f64> = self.instances.iter().filter_map(|s| s.final_accuracy).collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }
}

fn average_series(runs: &[Vec<MetricsRow>]) -> Vec<MetricsRow> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let count = runs.len() as f64;
    (0..len)
        .map(|j| {
            let first = &runs[0][j];
            let mean = |f: &dyn Fn(&MetricsRow) -> f64| runs.iter().map(|r| f(&r[j])).sum::<f64>() / count;
            MetricsRow {
                k: first.k,
                eta: first.eta,
                gamma: first.gamma,
                loss: mean(&|r| r.loss),
                consensus_err: mean(&|r| r.consensus_err),
                tracking_err: mean(&|r| r.tracking_err),
                grad_norm_sq: mean(&|r| r.grad_norm_sq),
                accuracy: first.accuracy.map(|_| mean(&|r| r.accuracy.unwrap_or(f64::NAN))),
            }
        })
        .collect()
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))
}

fn execute(
    cfg: &ExperimentConfig,
    problem: &Problem,
    kind: EstimatorKind,
    schedule: StepSchedule,
) -> Result<RunResult, HarnessError> {
    let ctx = Ctx {
        cfg,
        problem,
        kind,
        schedule,
        stride: cfg.stride(),
    };
    let pool = thread_pool(cfg.algorithm.threads)?;
    let outcomes: Vec<InstanceOutcome> = pool.install(|| {
        (0..cfg.algorithm.instances)
            .into_par_iter()
            .map(|i| run_instance(&ctx, i))
            .collect::<Result<_, _>>()
    })?;
    let n = problem.n();
    let dim = cfg.objective.dim;
    let instances: Vec<InstanceSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    let failure = {
        let errors: Vec<&str> = instances.iter().filter_map(|s| s.error.as_deref()).collect();
        (!errors.is_empty()).then(|| errors.join("; "))
    };
    let count = outcomes.len() as f64;
    let mut final_mean = vec![0.0; dim];
    for o in &outcomes {
        for (a, b) in final_mean.iter_mut().zip(&o.final_mean) {
            *a += b / count;
        }
    }
    let runs: Vec<Vec<MetricsRow>> = outcomes.iter().map(|o| o.rows.clone()).collect();
    let series = average_series(&runs);

    let objectives0 = build_objectives(cfg, problem, 0)?;
    let smoothness = objectives0.iter().map(|o| o.smoothness()).fold(0.0, f64::max);

    let mut oracles = Vec::new();
    let report = validate_mixing(problem.mixing.matrix(), Some(&problem.graph));
    oracles.push(OracleReport::new("mixing_invariants", report.failures().len() as f64, 0.0, 0.0));
    if n <= DENSE_SIZE_GUARD {
        let dense = dense_spectral_norm(&deflated(problem.mixing.matrix()))?;
        oracles.push(OracleReport::new("spectral_gap", problem.mixing.rho_w(), dense, 1e-8));
    }
    if series.len() >= MIN_SUMMABILITY_LEN {
        oracles.push(consensus_summability_check(&series, &schedule)?);
    }
    if let Some(o) = outcomes.first() {
        if o.final_x.is_finite() {
            oracles.push(lemma_lipschitz_check(&objectives0, &o.final_x, smoothness)?);
        }
    }

    let rate = if kind == EstimatorKind::OnePoint
        && failure.is_none()
        && validate_schedule_for_rate(schedule.v1, schedule.v2).is_ok()
    {
        let mean = |f: &dyn Fn(&InstanceSummary) -> f64| instances.iter().map(f).sum::<f64>() / count;
        let max = |f: &dyn Fn(&InstanceSummary) -> f64| instances.iter().map(f).fold(0.0, f64::max);
        let (sigma3, sigma4) = bernoulli_moments(dim);
        let constants = rate_constants(&RateInputs {
            delta0: mean(&|s| s.delta0),
            smoothness,
            n,
            rho_w: problem.mixing.rho_w(),
            sigma1: smoothness,
            sigma3,
            sigma4,
            schedule,
            x0_consensus_err: mean(&|s| s.x0_consensus_err),
            mbar: max(&|s| s.mbar),
            tracking_bound_sq: max(&|s| s.tracking_max),
        })?;
        let bound = rate_bound(&constants, cfg.algorithm.iterations, schedule.v1, schedule.v2)?;
        let measured = mean(&|s| s.weighted_grad_avg);
        Some(RateEvaluation {
            constants,
            bound,
            measured,
            holds: measured <= bound,
        })
    } else {
        None
    };

    Ok(RunResult {
        kind,
        schedule,
        iterations: cfg.algorithm.iterations,
        stride: ctx.stride,
        n,
        dim,
        edges: problem.graph.edge_count(),
        rho_w: problem.mixing.rho_w(),
        smoothness,
        series,
        final_mean,
        instances,
        rate,
        oracles,
        failure,
        config_text: cfg.to_text(),
    })
}

/// Runs every instance with the configured estimator and schedule.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    log::info!(
        "graph n = {} with {} edges, rho_w = {:.6}",
        problem.n(),
        problem.graph.edge_count(),
        problem.mixing.rho_w()
    );
    execute(cfg, &problem, cfg.algorithm.estimator, cfg.step_schedule()?)
}

/// Zero-order run and first-order baseline on identical instances.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub zero_order: RunResult,
    pub baseline: RunResult,
}

pub fn compare_baselines(cfg: &ExperimentConfig) -> Result<Comparison, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let zero_order = execute(cfg, &problem, cfg.algorithm.estimator, cfg.step_schedule()?)?;
    let baseline = execute(
        cfg,
        &problem,
        EstimatorKind::FirstOrder {
            noise_sigma: cfg.baseline.noise_sigma,
        },
        cfg.baseline_schedule()?,
    )?;
    Ok(Comparison { zero_order, baseline })
}

/// First recorded iteration whose loss is at or below `level`.
pub fn loss_level_iteration(series: &[MetricsRow], level: f64) -> Option<usize> {
    series.iter().find(|r| r.loss <= level).map(|r| r.k)
}

/// Bias of the one-point estimator for agent 0 of instance 0 at the instance's
/// starting average, for each configured radius.
pub fn run_bias_check(cfg: &ExperimentConfig) -> Result<Vec<BiasReport>, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let objectives = build_objectives(cfg, &problem, 0)?;
    let x = initial_point(cfg.algorithm.seed, problem.n(), cfg.objective.dim, 0).row_mean();
    let mut rng = rng_for(cfg.algorithm.seed, Stream::Oracle, 1);
    cfg.bias
        .radii
        .iter()
        .map(|&gamma| Ok(bias_characterize(&objectives[0], &x, gamma, cfg.bias.trials, &mut rng)?))
        .collect()
}
