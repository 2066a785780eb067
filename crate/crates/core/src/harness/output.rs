use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::runner::{loss_level_iteration, Comparison, RunResult};
use super::HarnessError;
use crate::engine::MetricsRow;

pub const METRICS_HEADER: &str = "k,eta,gamma,loss,consensus_err,tracking_err,grad_norm_sq,accuracy";

pub fn metrics_csv(series: &[MetricsRow]) -> String {
    let mut s = String::with_capacity(series.len() * 120);
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in series {
        let _ = write!(
            s,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},",
            r.k, r.eta, r.gamma, r.loss, r.consensus_err, r.tracking_err, r.grad_norm_sq
        );
        if let Some(a) = r.accuracy {
            let _ = write!(s, "{a:.12e}");
        }
        s.push('\n');
    }
    s
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points or degenerate `x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Log-log slope of `field` against `k + 1` over the final decade `k ≥ K/10`.
pub fn tail_slope(series: &[MetricsRow], field: impl Fn(&MetricsRow) -> f64) -> Option<f64> {
    let k_last = series.last()?.k;
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|r| r.k >= k_last / 10 && r.k > 0)
        .map(|r| (r.k as f64 + 1.0, field(r)))
        .collect();
    fit_loglog_slope(&points)
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn summary_text(r: &RunResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# generated unix_time={}", timestamp());
    let _ = writeln!(s, "estimator = {}", r.kind);
    let _ = writeln!(s, "agents = {}\nedges = {}\nrho_w = {:.12e}", r.n, r.edges, r.rho_w);
    let _ = writeln!(s, "dim = {}\niterations = {}\ninstances = {}\nstride = {}", r.dim, r.iterations, r.instances.len(), r.stride);
    let sc = &r.schedule;
    let _ = writeln!(s, "eta0 = {}\ngamma0 = {}\nv1 = {}\nv2 = {}", sc.eta0, sc.gamma0, sc.v1, sc.v2);
    let _ = writeln!(s, "smoothness = {:.12e}", r.smoothness);
    if let Some(f) = r.final_row() {
        let _ = writeln!(
            s,
            "final_loss = {:.12e}\nfinal_consensus_err = {:.12e}\nfinal_tracking_err = {:.12e}\nfinal_grad_norm_sq = {:.12e}",
            f.loss, f.consensus_err, f.tracking_err, f.grad_norm_sq
        );
    }
    if let Some(a) = r.final_accuracy() {
        let _ = writeln!(s, "final_accuracy = {a:.6}");
    }
    let x: Vec<String> = r.final_mean.iter().map(|v| format!("{v:.9e}")).collect();
    let _ = writeln!(s, "final_mean = {}", x.join(" "));
    if let Some(slope) = tail_slope(&r.series, |row| row.consensus_err) {
        let _ = writeln!(s, "consensus_tail_slope = {slope:.6}");
    }
    let tripped = r.instances.iter().filter(|i| i.guard_tripped).count();
    let _ = writeln!(s, "norm_guard_tripped_instances = {tripped}");
    if let Some(rate) = &r.rate {
        let c = &rate.constants;
        let _ = writeln!(
            s,
            "rate_a1 = {:.6e}\nrate_a2 = {:.6e}\nrate_a3 = {:.6e}\nrate_a4 = {:.6e}\nrate_mbar = {:.6e}\nrate_g = {:.6e}",
            c.a1, c.a2, c.a3, c.a4, c.mbar, c.g
        );
        let _ = writeln!(
            s,
            "rate_bound = {:.6e}\nrate_measured = {:.6e}\nrate_holds = {}",
            rate.bound, rate.measured, rate.holds
        );
    }
    let passed = r.oracles.iter().filter(|o| o.pass).count();
    let _ = writeln!(s, "oracles_passed = {passed}/{}", r.oracles.len());
    if let Some(f) = &r.failure {
        let _ = writeln!(s, "failure = {f}");
    }
    s
}

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
    color: &'static str,
    dashed: bool,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line chart; log axes drop nonpositive values.
fn svg_plot(title: &str, y_label: &str, curves: &[Curve], log_x: bool, log_y: bool) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 80.0, 20.0, 40.0, 50.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let usable = |(x, y): &(f64, f64)| {
        x.is_finite() && y.is_finite() && (!log_x || *x > 0.0) && (!log_y || *y > 0.0)
    };
    let pts: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|c| c.points.iter().filter(|p| usable(p)).map(|&(x, y)| (tx(x), ty(y))))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, w / 2.0);
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let fmt_tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            h - bottom + 18.0,
            fmt_tick(xv, log_x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            fmt_tick(yv, log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        if log_x { "k + 1" } else { "k" }
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (idx, c) in curves.iter().enumerate() {
        let path: Vec<String> = c
            .points
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y))))
            .collect();
        if path.is_empty() {
            continue;
        }
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            c.color,
            path.join(" ")
        );
        let ly = top + 16.0 + 16.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            w - right - 190.0,
            w - right - 165.0,
            c.color,
            w - right - 160.0,
            ly + 4.0,
            c.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn curve(label: &str, series: &[MetricsRow], idx: usize, shift: bool, f: impl Fn(&MetricsRow) -> f64) -> Curve {
    Curve {
        label: label.to_string(),
        points: series
            .iter()
            .map(|r| (r.k as f64 + if shift { 1.0 } else { 0.0 }, f(r)))
            .collect(),
        color: PALETTE[idx % PALETTE.len()],
        dashed: false,
    }
}

/// `S₁/(k+1)` anchored at the first row of the final decade.
fn consensus_reference(series: &[MetricsRow]) -> Option<Curve> {
    let k_last = series.last()?.k;
    let anchor = series.iter().find(|r| r.k >= (k_last / 10).max(1))?;
    let s1 = anchor.consensus_err * (anchor.k as f64 + 1.0);
    Some(Curve {
        label: "S1/(k+1)".into(),
        points: series.iter().map(|r| (r.k as f64 + 1.0, s1 / (r.k as f64 + 1.0))).collect(),
        color: "#7f7f7f",
        dashed: true,
    })
}

fn write_plots(dir: &Path, runs: &[(&str, &RunResult)]) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        write_file(&path, &body)?;
        written.push(path);
        Ok(())
    };
    let loss: Vec<Curve> = runs
        .iter()
        .enumerate()
        .map(|(i, (l, r))| curve(l, &r.series, i, false, |row| row.loss))
        .collect();
    emit("loss.svg", svg_plot("Objective F(mean x)", "loss", &loss, false, true))?;

    let mut consensus: Vec<Curve> = runs
        .iter()
        .enumerate()
        .map(|(i, (l, r))| curve(l, &r.series, i, true, |row| row.consensus_err))
        .collect();
    if let Some(reference) = consensus_reference(&runs[0].1.series) {
        consensus.push(reference);
    }
    emit("consensus.svg", svg_plot("Consensus error", "||x - 1 mean x||^2", &consensus, true, true))?;

    let tracking: Vec<Curve> = runs
        .iter()
        .enumerate()
        .map(|(i, (l, r))| curve(l, &r.series, i, true, |row| row.tracking_err))
        .collect();
    emit("tracking.svg", svg_plot("Tracking error", "||y - 1 mean y||^2", &tracking, true, true))?;

    let grad: Vec<Curve> = runs
        .iter()
        .enumerate()
        .map(|(i, (l, r))| curve(l, &r.series, i, true, |row| row.grad_norm_sq))
        .collect();
    emit("grad_norm.svg", svg_plot("Squared gradient norm", "||grad F(mean x)||^2", &grad, true, true))?;

    if runs.iter().any(|(_, r)| r.series.iter().any(|row| row.accuracy.is_some())) {
        let acc: Vec<Curve> = runs
            .iter()
            .enumerate()
            .map(|(i, (l, r))| curve(l, &r.series, i, false, |row| row.accuracy.unwrap_or(f64::NAN)))
            .collect();
        emit("accuracy.svg", svg_plot("Test accuracy", "accuracy", &acc, false, false))?;
    }
    Ok(written)
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Writes `metrics.csv`, `summary.txt`, `oracles.txt`, `config.txt`, optional
/// SVG plots, and a `FAILED` marker when the run is partial.
pub fn emit_outputs(result: &RunResult, dir: &Path, plots: bool) -> Result<Vec<PathBuf>, HarnessError> {
    create_dir(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<(), HarnessError> {
        let path = dir.join(name);
        write_file(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("metrics.csv", &metrics_csv(&result.series))?;
    put("summary.txt", &summary_text(result))?;
    let oracles: String = result.oracles.iter().map(|o| format!("{o}\n")).collect();
    put("oracles.txt", &oracles)?;
    put("config.txt", &result.config_text)?;
    let marker = dir.join("FAILED");
    match &result.failure {
        Some(f) => put("FAILED", &format!("{f}\n"))?,
        None if marker.exists() => fs::remove_file(&marker).map_err(|e| HarnessError::Io {
            path: marker.clone(),
            source: e,
        })?,
        None => {}
    }
    if plots && !result.series.is_empty() {
        written.extend(write_plots(dir, &[(&result.kind.to_string(), result)])?);
    }
    Ok(written)
}

/// Per-run outputs under `zero_order/` and `baseline/`, joint plots and
/// `comparison.txt` with iterations needed to reach shared loss levels.
pub fn emit_comparison(c: &Comparison, dir: &Path, plots: bool) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = emit_outputs(&c.zero_order, &dir.join("zero_order"), plots)?;
    written.extend(emit_outputs(&c.baseline, &dir.join("baseline"), plots)?);
    let mut s = String::new();
    let _ = writeln!(s, "# generated unix_time={}", timestamp());
    let start = c.zero_order.series.first().map_or(f64::NAN, |r| r.loss);
    let zo_end = c.zero_order.final_row().map_or(f64::NAN, |r| r.loss);
    let fo_end = c.baseline.final_row().map_or(f64::NAN, |r| r.loss);
    let _ = writeln!(s, "initial_loss = {start:.9e}");
    let _ = writeln!(s, "final_loss_zero_order = {zo_end:.9e}\nfinal_loss_baseline = {fo_end:.9e}");
    let _ = writeln!(s, "level,zero_order_k,baseline_k");
    for frac in [0.25, 0.5, 0.75] {
        let level = start - frac * (start - zo_end.max(fo_end));
        let show = |k: Option<usize>| k.map_or_else(|| "never".to_string(), |k| k.to_string());
        let _ = writeln!(
            s,
            "{level:.9e},{},{}",
            show(loss_level_iteration(&c.zero_order.series, level)),
            show(loss_level_iteration(&c.baseline.series, level))
        );
    }
    let path = dir.join("comparison.txt");
    write_file(&path, &s)?;
    written.push(path);
    if plots && !c.zero_order.series.is_empty() && !c.baseline.series.is_empty() {
        let zo = c.zero_order.kind.to_string();
        let fo = c.baseline.kind.to_string();
        written.extend(write_plots(dir, &[(&zo, &c.zero_order), (&fo, &c.baseline)])?);
    }
    Ok(written)
}
