//! Experiment configuration, execution and reporting.

mod config;
mod output;
mod runner;

pub use config::{
    AlgorithmConfig, BaselineConfig, BiasConfig, ExperimentConfig, GraphConfig, Normalization, ObjectiveConfig,
    ObjectiveKind, OutputConfig, ScheduleConfig,
};
pub use output::{emit_comparison, emit_outputs, fit_loglog_slope, metrics_csv, tail_slope, METRICS_HEADER};
pub use runner::{
    build_objectives, build_problem, compare_baselines, initial_point, loss_level_iteration, run_bias_check, run_experiment,
    Comparison, InstanceSummary, Problem, RateEvaluation, RunResult,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::engine::EngineError;
use crate::estimators::EstimatorError;
use crate::objectives::ObjectiveError;
use crate::oracles::OracleError;
use crate::topology::TopologyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
