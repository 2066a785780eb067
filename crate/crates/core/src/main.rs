use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zogt::harness::{
    compare_baselines, emit_comparison, emit_outputs, run_bias_check, run_experiment, ExperimentConfig, HarnessError,
};
use zogt::oracles::run_oracle_suite;
use zogt::topology::{gen_erdos_renyi, laplacian_weights, validate_mixing, Graph};

#[derive(Parser)]
#[command(name = "zogt", version, about = "Distributed zero-order gradient tracking experiments")]
struct Cli {
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding the config (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics, summary and plots.
    Run { config: PathBuf },
    /// Run the zero-order method and the first-order baseline on the same instances.
    Compare { config: PathBuf },
    /// Parse and validate a config, printing its canonical form.
    Validate { config: PathBuf },
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Monte-Carlo bias of the one-point estimator at several radii.
    BiasCheck { config: PathBuf },
    /// Run the built-in numerical self-checks.
    OracleSuite,
}

#[derive(Subcommand)]
enum GraphAction {
    /// Sample a connected Erdos-Renyi graph and write its edge list.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        graph_seed: u64,
        /// Destination file; stdout when absent.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Validate the Laplacian mixing matrix of an edge-list file.
    Check { file: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.algorithm.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.algorithm.threads = t;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn execute(cli: &Cli) -> Result<bool, HarnessError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let result = run_experiment(&cfg)?;
            emit_outputs(&result, &cfg.output.dir, cfg.output.plots)?;
            if let Some(f) = result.final_row() {
                println!(
                    "k={} loss={:.6e} consensus={:.3e} grad_norm_sq={:.3e}",
                    f.k, f.loss, f.consensus_err, f.grad_norm_sq
                );
            }
            if let Some(a) = result.final_accuracy() {
                println!("accuracy={a:.4}");
            }
            if let Some(r) = &result.rate {
                println!("rate measured={:.4e} bound={:.4e} holds={}", r.measured, r.bound, r.holds);
            }
            println!("outputs in {}", cfg.output.dir.display());
            if let Some(f) = &result.failure {
                eprintln!("run failed: {f}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Compare { config } => {
            let cfg = load(cli, config)?;
            let c = compare_baselines(&cfg)?;
            emit_comparison(&c, &cfg.output.dir, cfg.output.plots)?;
            for r in [&c.zero_order, &c.baseline] {
                if let Some(f) = r.final_row() {
                    println!("{}: final loss {:.6e}", r.kind, f.loss);
                }
            }
            println!("outputs in {}", cfg.output.dir.display());
            Ok(c.zero_order.failure.is_none() && c.baseline.failure.is_none())
        }
        Command::Validate { config } => {
            let cfg = load(cli, config)?;
            print!("{}", cfg.to_text());
            Ok(true)
        }
        Command::Graph { action } => match action {
            GraphAction::Gen { n, p, graph_seed, file } => {
                let g = gen_erdos_renyi(*n, *p, *graph_seed)?;
                match file {
                    Some(path) => {
                        write(path, &g.to_edge_list())?;
                        println!("wrote {} edges to {}", g.edge_count(), path.display());
                    }
                    None => print!("{}", g.to_edge_list()),
                }
                Ok(true)
            }
            GraphAction::Check { file } => {
                let g = Graph::read_edge_list(file)?;
                let w = laplacian_weights(&g)?;
                let report = validate_mixing(w.matrix(), Some(&g));
                println!("n = {}, edges = {}, max degree = {}", g.n(), g.edge_count(), g.max_degree());
                print!("{report}");
                Ok(report.passed())
            }
        },
        Command::BiasCheck { config } => {
            let cfg = load(cli, config)?;
            let reports = run_bias_check(&cfg)?;
            let text: String = reports.iter().map(|r| format!("{r}\n")).collect();
            print!("{text}");
            write(&cfg.output.dir.join("bias.txt"), &text)?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::OracleSuite => {
            let reports = run_oracle_suite(cli.seed.unwrap_or(1))?;
            let text: String = reports.iter().map(|r| format!("{r}\n")).collect();
            print!("{text}");
            if cli.out.is_some() {
                write(&out_dir(cli).join("oracles.txt"), &text)?;
            }
            Ok(reports.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
