use std::fs;
use std::process::Command;

fn zogt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zogt"))
}

#[test]
fn validate_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "[graph]\nn = three\n").unwrap();
    let out = zogt().args(["--quiet", "validate"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.cfg");
    fs::write(&path, "# defaults only\n").unwrap();
    let out = zogt().args(["--quiet", "validate"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("eta0 = 1.5") && text.contains("instances = 30"));
}

#[test]
fn graph_gen_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.edges");
    let gen = zogt()
        .args(["--quiet", "graph", "gen", "--n", "20", "--p", "0.3", "--graph-seed", "5", "--file"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(gen.status.success());
    let check = zogt().args(["--quiet", "graph", "check"]).arg(&path).output().unwrap();
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stdout));
    assert!(String::from_utf8_lossy(&check.stdout).contains("n = 20"));
}

#[test]
fn disconnected_edge_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.edges");
    fs::write(&path, "4\n0 1\n2 3\n").unwrap();
    let out = zogt().args(["--quiet", "graph", "check"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_suite_passes() {
    let out = zogt().args(["--quiet", "oracle-suite"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bias_check_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.cfg");
    fs::write(
        &path,
        "[graph]\nn = 4\np = 1\n[objective]\nsamples = 200\ndim = 3\nzeta_sigma = 0\n[bias]\ntrials = 20000\nradii = 0.4, 0.2\n",
    )
    .unwrap();
    let out = zogt().args(["--quiet", "--out"]).arg(dir.path().join("o")).arg("bias-check").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(dir.path().join("o/bias.txt")).unwrap();
    assert_eq!(report.lines().count(), 2);
}

#[test]
fn run_writes_outputs_and_seed_flag_matters() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.cfg");
    fs::write(
        &path,
        "[graph]\nn = 5\np = 0.6\n[objective]\nsamples = 100\ndim = 2\n[algorithm]\niterations = 30\ninstances = 1\n[output]\nplots = false\n",
    )
    .unwrap();
    let run = |seed: &str, name: &str| {
        let out = zogt()
            .args(["--quiet", "--seed", seed, "--out"])
            .arg(dir.path().join(name))
            .arg("run")
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.path().join(name).join("metrics.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}
