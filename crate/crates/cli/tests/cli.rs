use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pinn-ode"));
    c.env_remove("PINN_ODE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const SMALL: &str = r#"
problem = "lotka-volterra"
seed = 3

[network]
layers = 2
neurons = 8

[training]
epochs = 25
lbfgs_iters = 5
collocation = 20
eval_points = 40
l2_every = 10
"#;

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn solve_mass_spring_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ms");
    let o = run(&["solve", "--problem", "mass-spring", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(header.starts_with("t,x,y,dx,dy\n"));
    let rows = csv_rows(&out.join("solution.csv"));
    assert_eq!(rows.len(), 1000);
    for r in &rows {
        let t = r[0];
        assert!((r[1] - (2.0 * t.cos() + (2.0 * t).cos())).abs() <= 1e-6);
        assert!((r[2] - (4.0 * t.cos() - (2.0 * t).cos())).abs() <= 1e-6);
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert!(meta["max_abs_error_vs_analytic"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn solve_lorenz_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lz");
    let o = run(&["solve", "--problem", "lorenz", "--t-end", "3", "--points", "301", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("solution.csv"));
    assert_eq!(rows.len(), 301);
    assert_eq!(rows.last().unwrap()[0], 3.0);
    assert!(rows.iter().flatten().all(|v| v.is_finite() && v.abs() < 100.0));
    assert!(fs::read_to_string(out.join("solution.svg")).unwrap().contains("<polyline"));
}

#[test]
fn config_errors_exit_with_2() {
    let o = run(&["solve", "--problem", "pendulum"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pendulum"));
    assert_eq!(run(&["train", "--problem", "rlc", "--loss-weights", "1,2,3,4,5"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--problem", "rlc", "--activation", "gelu"]).status.code(), Some(2));
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn zero_epochs_report_initial_state_and_manifest_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t0");
    let cfg = small_config(dir.path());
    let o = run(&["train", "--config", &cfg, "--epochs", "0", "--lbfgs-iters", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["history"].as_array().unwrap().len(), 1);
    assert_eq!(report["seed"], 3);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    for name in ["report.json", "history.csv", "l2_history.csv", "trajectory.csv", "solution.svg", "loss.svg", "l2.svg", "config.toml"] {
        assert!(files.iter().any(|f| f == name), "{name} missing from manifest");
    }
    for f in files {
        let meta = fs::metadata(out.join(f.as_str().unwrap())).unwrap();
        assert!(meta.len() > 0);
    }
    assert!(run(&["report", out.to_str().unwrap()]).status.success());
}

#[test]
fn same_seed_same_history_and_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let history = |extra: &[&str], env: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut c = bin();
        c.args(["train", "--config", &cfg, "--out", out.to_str().unwrap()]).args(extra);
        if let Some(s) = env {
            c.env("PINN_ODE_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        fs::read_to_string(out.join("history.csv")).unwrap()
    };
    let a = history(&[], None, "a");
    assert_eq!(a, history(&[], None, "b"));
    // The file's seed wins over the environment; the flag wins over both.
    assert_eq!(a, history(&[], Some("11"), "c"));
    let d = history(&["--seed", "11"], Some("3"), "d");
    assert_ne!(a, d);

    let no_seed = dir.path().join("noseed.toml");
    fs::write(&no_seed, SMALL.replace("seed = 3\n", "")).unwrap();
    let out = dir.path().join("e");
    let o = bin()
        .args(["train", "--config", no_seed.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("PINN_ODE_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("history.csv")).unwrap(), d);
}

#[test]
fn divergence_and_internal_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("div.toml");
    fs::write(&path, SMALL.replace("l2_every = 10", "l2_every = 10\ndivergence_threshold = 1e-12")).unwrap();
    let out = dir.path().join("div");
    let o = run(&["train", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"diverged\": true"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = small_config(dir.path());
    let o = run(&["train", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_rows_match_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let grid = r#"
layers = [1, 2]
neurons = [4, 6]
activations = ["tanh"]
weight_sets = [[1.0, 1.0, 1.0, 1.0]]

[base]
problem = "rlc"

[base.training]
epochs = 10
lbfgs_iters = 0
collocation = 16
eval_points = 30
"#;
    let path = dir.path().join("grid.toml");
    fs::write(&path, grid).unwrap();
    let o = run(&["sweep", "--config", path.to_str().unwrap(), "--workers", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,4,tanh,"));
    assert!(run(&["report", out.to_str().unwrap()]).status.success());
}

#[test]
fn noise_study_writes_phase_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ns");
    let o = run(&[
        "noise-study", "--sigmas", "0,0.2", "--epochs", "5", "--lbfgs-iters", "0", "--layers", "1", "--neurons", "4",
        "--colloc", "10", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("noise_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    for s in ["sigma-0", "sigma-0.2"] {
        assert!(out.join(s).join("phase.csv").exists());
        assert!(out.join(s).join("report.json").exists());
    }
    assert_eq!(run(&["noise-study", "--sigmas", "-1"]).status.code(), Some(2));
}
