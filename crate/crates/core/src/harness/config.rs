//! Experiment configuration.
//!
//! Sectioned plain text:
//!
//! ```text
//! # comment
//! [section]
//! key = value   # trailing comment
//! ```
//!
//! Numbers accept decimal, scientific and `a/b` fraction notation. Unknown
//! sections or keys are parse errors. See the README for every key.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::engine::{validate_schedule, StepSchedule};
use crate::estimators::EstimatorKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    Logistic,
    Quadratic,
}

/// How a logistic shard sum is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the total sample count `m`; regularizer `c/n` per agent.
    Global,
    /// Divide by the agent's own shard size; full regularizer `c` per agent.
    Local,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphConfig {
    pub n: usize,
    pub p: f64,
    /// Sampling seed; derived from the base seed when absent.
    pub seed: Option<u64>,
    /// Edge-list file that replaces random sampling.
    pub edges: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub samples: usize,
    pub test_samples: usize,
    pub separation: f64,
    pub c: f64,
    pub zeta_sigma: f64,
    pub u_sigma: f64,
    pub normalization: Normalization,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub eta0: f64,
    pub gamma0: f64,
    pub v1: f64,
    pub v2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmConfig {
    pub estimator: EstimatorKind,
    pub iterations: usize,
    pub instances: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub norm_guard: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub eta0: f64,
    pub v1: f64,
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Recording stride; `max(1, K/2000)` when absent.
    pub stride: Option<usize>,
    pub plots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasConfig {
    pub trials: usize,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub objective: ObjectiveConfig,
    pub schedule: ScheduleConfig,
    pub algorithm: AlgorithmConfig,
    pub baseline: BaselineConfig,
    pub output: OutputConfig,
    pub bias: BiasConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphConfig {
                n: 31,
                p: 0.3,
                seed: None,
                edges: None,
            },
            objective: ObjectiveConfig {
                kind: ObjectiveKind::Logistic,
                dim: 10,
                train: None,
                test: None,
                samples: 12_000,
                test_samples: 2_000,
                separation: 3.0,
                c: 0.1,
                zeta_sigma: 1.0,
                u_sigma: 0.01,
                normalization: Normalization::Global,
            },
            schedule: ScheduleConfig {
                eta0: 1.5,
                gamma0: 3.5,
                v1: 0.51,
                v2: 0.17,
            },
            algorithm: AlgorithmConfig {
                estimator: EstimatorKind::OnePoint,
                iterations: 20_000,
                instances: 30,
                seed: 1,
                threads: 0,
                norm_guard: 1e6,
            },
            baseline: BaselineConfig {
                eta0: 2.5,
                v1: 0.51,
                noise_sigma: 0.1,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                stride: None,
                plots: true,
            },
            bias: BiasConfig {
                trials: 100_000,
                radii: vec![0.2, 0.1, 0.05],
            },
        }
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    match raw.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => raw.parse().ok(),
    }
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

impl Line<'_> {
    fn err(&self, msg: impl Into<String>) -> HarnessError {
        HarnessError::Parse {
            line: self.no,
            msg: msg.into(),
        }
    }

    fn f64(&self) -> Result<f64, HarnessError> {
        parse_number(self.value).ok_or_else(|| self.err(format!("`{}` expects a number, found {:?}", self.key, self.value)))
    }

    fn usize(&self) -> Result<usize, HarnessError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` expects a nonnegative integer, found {:?}", self.key, self.value)))
    }

    fn u64(&self) -> Result<u64, HarnessError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` expects an unsigned integer, found {:?}", self.key, self.value)))
    }

    fn bool(&self) -> Result<bool, HarnessError> {
        match self.value {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(self.err(format!("`{}` expects true or false, found {:?}", self.key, self.value))),
        }
    }

    fn path(&self, base: &Path) -> PathBuf {
        let p = PathBuf::from(self.value);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    }

    fn unknown(&self, section: &str) -> HarnessError {
        self.err(format!("unknown key `{}` in [{section}]", self.key))
    }
}

impl ExperimentConfig {
    /// Parses configuration text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let no = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(HarnessError::Parse {
                    line: no,
                    msg: format!("malformed section header {content:?}"),
                })?;
                let name = name.trim();
                if !["graph", "weights", "objective", "schedule", "algorithm", "baseline", "output", "bias"].contains(&name) {
                    return Err(HarnessError::Parse {
                        line: no,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(HarnessError::Parse {
                line: no,
                msg: format!("expected `key = value`, found {content:?}"),
            })?;
            let line = Line {
                no,
                key: key.trim(),
                value: value.trim(),
            };
            let sec = section.as_deref().ok_or_else(|| line.err("key outside of any [section]"))?;
            cfg.apply(sec, &line, base_dir)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, line: &Line<'_>, base: &Path) -> Result<(), HarnessError> {
        match (section, line.key) {
            ("graph", "n") => self.graph.n = line.usize()?,
            ("graph", "p") => self.graph.p = line.f64()?,
            ("graph", "seed") => self.graph.seed = Some(line.u64()?),
            ("graph", "edges") => self.graph.edges = Some(line.path(base)),
            ("weights", "method") => {
                if line.value != "laplacian" {
                    return Err(line.err(format!("unsupported weights method {:?} (laplacian)", line.value)));
                }
            }
            ("objective", "kind") => {
                self.objective.kind = match line.value {
                    "logistic" => ObjectiveKind::Logistic,
                    "quadratic" => ObjectiveKind::Quadratic,
                    other => return Err(line.err(format!("unknown objective kind {other:?} (logistic, quadratic)"))),
                }
            }
            ("objective", "dim") => self.objective.dim = line.usize()?,
            ("objective", "train") => self.objective.train = Some(line.path(base)),
            ("objective", "test") => self.objective.test = Some(line.path(base)),
            ("objective", "samples") => self.objective.samples = line.usize()?,
            ("objective", "test_samples") => self.objective.test_samples = line.usize()?,
            ("objective", "separation") => self.objective.separation = line.f64()?,
            ("objective", "c") => self.objective.c = line.f64()?,
            ("objective", "zeta_sigma") => self.objective.zeta_sigma = line.f64()?,
            ("objective", "u_sigma") => self.objective.u_sigma = line.f64()?,
            ("objective", "normalization") => {
                self.objective.normalization = match line.value {
                    "global" => Normalization::Global,
                    "local" => Normalization::Local,
                    other => return Err(line.err(format!("unknown normalization {other:?} (global, local)"))),
                }
            }
            ("schedule", "eta0") => self.schedule.eta0 = line.f64()?,
            ("schedule", "gamma0") => self.schedule.gamma0 = line.f64()?,
            ("schedule", "v1") => self.schedule.v1 = line.f64()?,
            ("schedule", "v2") => self.schedule.v2 = line.f64()?,
            ("algorithm", "estimator") => {
                let noise = match self.algorithm.estimator {
                    EstimatorKind::FirstOrder { noise_sigma } => noise_sigma,
                    _ => self.baseline.noise_sigma,
                };
                self.algorithm.estimator = match line.value.parse().map_err(|e: String| line.err(e))? {
                    EstimatorKind::FirstOrder { .. } => EstimatorKind::FirstOrder { noise_sigma: noise },
                    kind => kind,
                };
            }
            ("algorithm", "fo_noise_sigma") => {
                let sigma = line.f64()?;
                if let EstimatorKind::FirstOrder { noise_sigma } = &mut self.algorithm.estimator {
                    *noise_sigma = sigma;
                } else {
                    self.baseline.noise_sigma = sigma;
                }
            }
            ("algorithm", "iterations") => self.algorithm.iterations = line.usize()?,
            ("algorithm", "instances") => self.algorithm.instances = line.usize()?,
            ("algorithm", "seed") => self.algorithm.seed = line.u64()?,
            ("algorithm", "threads") => self.algorithm.threads = line.usize()?,
            ("algorithm", "norm_guard") => self.algorithm.norm_guard = line.f64()?,
            ("baseline", "eta0") => self.baseline.eta0 = line.f64()?,
            ("baseline", "v1") => self.baseline.v1 = line.f64()?,
            ("baseline", "noise_sigma") => self.baseline.noise_sigma = line.f64()?,
            ("output", "dir") => self.output.dir = line.path(base),
            ("output", "stride") => {
                self.output.stride = if line.value == "auto" { None } else { Some(line.usize()?) }
            }
            ("output", "plots") => self.output.plots = line.bool()?,
            ("bias", "trials") => self.bias.trials = line.usize()?,
            ("bias", "radii") => {
                self.bias.radii = line
                    .value
                    .split(',')
                    .map(|v| parse_number(v.trim()).ok_or_else(|| line.err(format!("bad radius {v:?}"))))
                    .collect::<Result<_, _>>()?
            }
            (sec, _) => return Err(line.unknown(sec)),
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    /// Checks every constraint and reports all violations together.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut v = Vec::new();
        if let Err(violations) = validate_schedule(self.schedule.v1, self.schedule.v2) {
            v.extend(violations.iter().map(|x| format!("schedule: {x}")));
        }
        if !(self.schedule.eta0 > 0.0) || !(self.schedule.gamma0 > 0.0) {
            v.push("schedule: eta0 and gamma0 must be > 0".into());
        }
        if self.graph.edges.is_none() {
            if self.graph.n < 2 {
                v.push("graph: n must be >= 2".into());
            }
            if !(self.graph.p > 0.0 && self.graph.p <= 1.0) {
                v.push("graph: p must lie in (0, 1]".into());
            }
        }
        if self.algorithm.iterations < 1 {
            v.push("algorithm: iterations must be >= 1".into());
        }
        if self.algorithm.instances < 1 {
            v.push("algorithm: instances must be >= 1".into());
        }
        if !(self.algorithm.norm_guard > 0.0) {
            v.push("algorithm: norm_guard must be > 0".into());
        }
        if let EstimatorKind::FirstOrder { noise_sigma } = self.algorithm.estimator {
            if !(noise_sigma >= 0.0) {
                v.push("algorithm: fo_noise_sigma must be >= 0".into());
            }
        }
        if self.objective.dim < 1 {
            v.push("objective: dim must be >= 1".into());
        }
        if !(self.objective.c >= 0.0) {
            v.push("objective: c must be >= 0".into());
        }
        if !(self.objective.zeta_sigma >= 0.0) || !(self.objective.u_sigma >= 0.0) {
            v.push("objective: noise std must be >= 0".into());
        }
        if self.objective.kind == ObjectiveKind::Logistic && self.objective.train.is_none() {
            if self.objective.samples < self.graph.n {
                v.push("objective: samples must be >= graph n".into());
            }
            if !(self.objective.separation >= 0.0) {
                v.push("objective: separation must be >= 0".into());
            }
        }
        if !(self.baseline.eta0 > 0.0) || !(self.baseline.noise_sigma >= 0.0) {
            v.push("baseline: eta0 must be > 0 and noise_sigma >= 0".into());
        }
        if let Err(violations) = validate_schedule(self.baseline.v1, self.schedule.v2) {
            v.extend(violations.iter().map(|x| format!("baseline: {x}")));
        }
        if self.output.stride == Some(0) {
            v.push("output: stride must be >= 1".into());
        }
        if self.bias.radii.iter().any(|r| !(*r > 0.0)) {
            v.push("bias: radii must be > 0".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(v))
        }
    }

    pub fn step_schedule(&self) -> Result<StepSchedule, HarnessError> {
        let s = &self.schedule;
        Ok(StepSchedule::new(s.eta0, s.gamma0, s.v1, s.v2)?)
    }

    /// Schedule of the first-order baseline; `γ` is carried along but unused.
    pub fn baseline_schedule(&self) -> Result<StepSchedule, HarnessError> {
        Ok(StepSchedule::new(
            self.baseline.eta0,
            self.schedule.gamma0,
            self.baseline.v1,
            self.schedule.v2,
        )?)
    }

    pub fn stride(&self) -> usize {
        self.output
            .stride
            .unwrap_or_else(|| (self.algorithm.iterations / 2000).max(1))
    }

    /// Canonical text form, parseable by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.graph;
        let _ = writeln!(s, "[graph]\nn = {}\np = {}", g.n, g.p);
        if let Some(seed) = g.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        if let Some(e) = &g.edges {
            let _ = writeln!(s, "edges = {}", e.display());
        }
        let _ = writeln!(s, "\n[weights]\nmethod = laplacian");
        let o = &self.objective;
        let kind = match o.kind {
            ObjectiveKind::Logistic => "logistic",
            ObjectiveKind::Quadratic => "quadratic",
        };
        let norm = match o.normalization {
            Normalization::Global => "global",
            Normalization::Local => "local",
        };
        let _ = writeln!(s, "\n[objective]\nkind = {kind}\ndim = {}", o.dim);
        if let Some(p) = &o.train {
            let _ = writeln!(s, "train = {}", p.display());
        }
        if let Some(p) = &o.test {
            let _ = writeln!(s, "test = {}", p.display());
        }
        let _ = writeln!(
            s,
            "samples = {}\ntest_samples = {}\nseparation = {}\nc = {}\nzeta_sigma = {}\nu_sigma = {}\nnormalization = {norm}",
            o.samples, o.test_samples, o.separation, o.c, o.zeta_sigma, o.u_sigma
        );
        let sc = &self.schedule;
        let _ = writeln!(s, "\n[schedule]\neta0 = {}\ngamma0 = {}\nv1 = {}\nv2 = {}", sc.eta0, sc.gamma0, sc.v1, sc.v2);
        let a = &self.algorithm;
        let _ = writeln!(
            s,
            "\n[algorithm]\nestimator = {}\niterations = {}\ninstances = {}\nseed = {}\nthreads = {}\nnorm_guard = {}",
            a.estimator, a.iterations, a.instances, a.seed, a.threads, a.norm_guard
        );
        if let EstimatorKind::FirstOrder { noise_sigma } = a.estimator {
            let _ = writeln!(s, "fo_noise_sigma = {noise_sigma}");
        }
        let b = &self.baseline;
        let _ = writeln!(s, "\n[baseline]\neta0 = {}\nv1 = {}\nnoise_sigma = {}", b.eta0, b.v1, b.noise_sigma);
        let out = &self.output;
        let stride = out.stride.map_or_else(|| "auto".to_string(), |v| v.to_string());
        let _ = writeln!(s, "\n[output]\ndir = {}\nstride = {stride}\nplots = {}", out.dir.display(), out.plots);
        let radii: Vec<String> = self.bias.radii.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "\n[bias]\ntrials = {}\nradii = {}", self.bias.trials, radii.join(", "));
        s
    }
}
