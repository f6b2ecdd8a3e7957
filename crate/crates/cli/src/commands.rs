use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pinn_ode::experiment::{run_sweep, ExperimentConfig, ObservationSource, SweepGrid, SweepRow};
use pinn_ode::integrate::{adaptive_rk45_integrate, uniform_grid, NoiseLevel, Rk45Options, Trajectory};
use pinn_ode::pinn::TrainReport;

use crate::config::{self, Overrides};
use crate::error::{CliError, CliResult};
use crate::plot::{Chart, Series};

/// Most points drawn per polyline.
const PLOT_POINTS: usize = 2000;

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> CliResult<()> {
    write(dir, name, &serde_json::to_string_pretty(value)?, files)
}

fn thin<T: Copy>(v: &[T]) -> Vec<T> {
    let stride = v.len().div_ceil(PLOT_POINTS).max(1);
    v.iter().step_by(stride).copied().collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    files: Vec<String>,
    diverged: bool,
}

fn write_manifest(dir: &Path, command: &str, files: &[PathBuf], diverged: bool) -> CliResult<()> {
    let names = files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let m = Manifest { command, files: names, diverged };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

fn state_names(problem: &pinn_ode::problems::OdeProblem) -> Vec<String> {
    let names = problem.component_names();
    let mut out: Vec<String> = names.iter().map(|n| n.to_string()).collect();
    if problem.order() == 2 {
        out.extend(names.iter().map(|n| format!("d{n}")));
    }
    out
}

#[derive(Serialize)]
struct SolveMeta {
    problem: pinn_ode::problems::OdeProblem,
    method: String,
    rtol: Option<f64>,
    atol: Option<f64>,
    accepted_steps: usize,
    rejected_steps: usize,
    points: usize,
    /// Largest deviation of the positions from the closed form, if known.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_error_vs_analytic: Option<f64>,
}

/// Integrate the problem with adaptive RK45 and write the trajectory.
pub fn solve(o: &Overrides, points: Option<usize>) -> CliResult<()> {
    let cfg = o.resolve()?;
    let problem = cfg.problem()?;
    let n = points.unwrap_or(cfg.training.eval_points);
    if n < 2 {
        return Err(CliError::Config("need at least two output points".into()));
    }
    let times = uniform_grid(problem.t_start, problem.t_end, n);
    let traj: Trajectory =
        adaptive_rk45_integrate(&problem, problem.t_start, &problem.initial_state(), &times, &Rk45Options::default())?;
    let dim = problem.dim();
    let max_err = problem.has_analytic().then(|| {
        traj.times
            .iter()
            .zip(&traj.states)
            .flat_map(|(t, s)| {
                let exact = problem.analytic(*t).unwrap_or_default();
                (0..dim).map(move |j| (s[j] - exact[j]).abs())
            })
            .fold(0.0, f64::max)
    });

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let names = state_names(&problem);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut files = Vec::new();
    write(dir, "solution.csv", &traj.to_csv(&name_refs), &mut files)?;
    let meta = SolveMeta {
        problem: problem.clone(),
        method: traj.info.method.clone(),
        rtol: traj.info.rtol,
        atol: traj.info.atol,
        accepted_steps: traj.info.accepted_steps,
        rejected_steps: traj.info.rejected_steps,
        points: n,
        max_abs_error_vs_analytic: max_err,
    };
    write_json(dir, "solution.json", &meta, &mut files)?;
    let chart = Chart {
        title: format!("{} reference solution", problem.name),
        x_label: "t".into(),
        y_label: "state".into(),
        log_y: false,
        series: (0..dim)
            .map(|j| Series { label: names[j].clone(), xs: &traj.times, ys: traj.component(j), dashed: false })
            .collect(),
    };
    write(dir, "solution.svg", &chart.render(), &mut files)?;
    write_manifest(dir, "solve", &files, false)?;

    println!("{}: {} points, {} accepted / {} rejected steps", problem.name, n, meta.accepted_steps, meta.rejected_steps);
    if let Some(e) = max_err {
        println!("max |error| vs closed form: {e:.3e}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Report files for one training run; returns the paths written.
pub fn write_train_outputs(dir: &Path, r: &TrainReport) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write_json(dir, "report.json", r, &mut files)?;
    write(dir, "history.csv", &r.history_csv(), &mut files)?;
    write(dir, "l2_history.csv", &r.l2_csv(), &mut files)?;
    write(dir, "trajectory.csv", &r.trajectory_csv(), &mut files)?;
    for (name, svg) in train_charts(r) {
        write(dir, name, &svg, &mut files)?;
    }
    Ok(files)
}

fn train_charts(r: &TrainReport) -> Vec<(&'static str, String)> {
    let names = r.problem.component_names();
    let times = thin(&r.eval_times);
    let stride = r.eval_times.len().div_ceil(PLOT_POINTS).max(1);
    let column = |rows: &[Vec<f64>], j: usize| rows.iter().step_by(stride).map(|s| s[j]).collect::<Vec<_>>();
    let mut series = Vec::new();
    for (j, n) in names.iter().enumerate() {
        series.push(Series { label: format!("{n} PINN"), xs: &times, ys: column(&r.prediction, j), dashed: false });
        series.push(Series { label: format!("{n} reference"), xs: &times, ys: column(&r.reference, j), dashed: true });
    }
    let solution = Chart {
        title: format!("{}: prediction vs reference", r.problem.name),
        x_label: "t".into(),
        y_label: "state".into(),
        log_y: false,
        series,
    }
    .render();

    let hist = thin(&r.history);
    let its: Vec<f64> = hist.iter().map(|h| h.iteration as f64).collect();
    let mut loss_series =
        vec![Series { label: "total".into(), xs: &its, ys: hist.iter().map(|h| h.total).collect(), dashed: false }];
    loss_series.push(Series { label: "ODE".into(), xs: &its, ys: hist.iter().map(|h| h.ode).collect(), dashed: true });
    if hist.iter().any(|h| h.data != 0.0) {
        loss_series.push(Series { label: "data".into(), xs: &its, ys: hist.iter().map(|h| h.data).collect(), dashed: true });
    }
    loss_series.push(Series { label: "IC".into(), xs: &its, ys: hist.iter().map(|h| h.ic).collect(), dashed: true });
    let loss = Chart {
        title: "Training loss".into(),
        x_label: "iteration".into(),
        y_label: "loss".into(),
        log_y: true,
        series: loss_series,
    }
    .render();

    let l2_its: Vec<f64> = r.l2_history.iter().map(|h| h.iteration as f64).collect();
    let mut l2_series =
        vec![Series { label: "total".into(), xs: &l2_its, ys: r.l2_history.iter().map(|h| h.total).collect(), dashed: false }];
    for (j, n) in names.iter().enumerate() {
        let ys = r.l2_history.iter().map(|h| h.per_component.get(j).copied().flatten().unwrap_or(f64::NAN)).collect();
        l2_series.push(Series { label: n.to_string(), xs: &l2_its, ys, dashed: true });
    }
    let l2 = Chart {
        title: "Relative L2 error".into(),
        x_label: "iteration".into(),
        y_label: "relative L2".into(),
        log_y: true,
        series: l2_series,
    }
    .render();

    vec![("solution.svg", solution), ("loss.svg", loss), ("l2.svg", l2)]
}

fn print_summary(r: &TrainReport) {
    let b = r.final_loss;
    println!(
        "{}: loss {:.4e} (data {:.3e}, ode {:.3e}, ic {:.3e}), relative L2 {:.4e}",
        r.problem.name, b.total, b.data, b.ode, b.ic, r.final_l2.total
    );
    println!(
        "  {} Adam + {} L-BFGS iterations in {:.1} s{}",
        r.adam_iterations,
        r.lbfgs_iterations,
        r.wall_seconds,
        if r.diverged { " (diverged)" } else { "" }
    );
}

fn train_one(cfg: &ExperimentConfig, dir: &Path) -> CliResult<TrainReport> {
    let report = cfg.run()?;
    let mut files = write_train_outputs(dir, &report)?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, config::to_toml(cfg)?)?;
    files.push(config_path);
    write_manifest(dir, "train", &files, report.diverged)?;
    Ok(report)
}

pub fn train(o: &Overrides) -> CliResult<()> {
    let cfg = o.resolve()?;
    let report = train_one(&cfg, &cfg.output_dir)?;
    print_summary(&report);
    println!("wrote {}", cfg.output_dir.display());
    if report.diverged {
        return Err(CliError::Diverged(report.failure.unwrap_or_default()));
    }
    Ok(())
}

pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub layers: Option<String>,
    pub neurons: Option<String>,
    pub activations: Option<String>,
    /// Weight sets separated by `;`, entries by `,`.
    pub weight_sets: Option<String>,
    pub common: Overrides,
    pub workers: usize,
}

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let mut grid = match &a.config {
        Some(path) => config::parse_sweep(&config::read(path)?)?,
        None => SweepGrid::rlc(a.common.quick),
    };
    if let Some(s) = &a.layers {
        grid.layers = config::parse_list(s, "layer count")?;
    }
    if let Some(s) = &a.neurons {
        grid.neurons = config::parse_list(s, "neuron count")?;
    }
    if let Some(s) = &a.activations {
        grid.activations = s.split(',').map(|p| config::parse_activation(p.trim())).collect::<CliResult<_>>()?;
    }
    if let Some(s) = &a.weight_sets {
        grid.weight_sets = s.split(';').map(|w| config::parse_list(w, "loss weight")).collect::<CliResult<_>>()?;
    }
    a.common.apply(&mut grid.base, false)?;
    grid.base.validate()?;
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    println!("running {} cells on {} worker(s)", cells.len(), a.workers.max(1));
    let rows = run_sweep(&grid, a.workers);

    let dir = &grid.base.output_dir;
    fs::create_dir_all(dir)?;
    let mut csv = String::from(SweepRow::csv_header());
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    let mut files = Vec::new();
    write(dir, "sweep.csv", &csv, &mut files)?;
    write_json(dir, "sweep.json", &rows, &mut files)?;
    write(dir, "sweep.toml", &config::to_toml(&grid)?, &mut files)?;
    write_manifest(dir, "sweep", &files, rows.iter().any(|r| r.diverged))?;
    print_sweep(&rows);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_sweep(rows: &[SweepRow]) {
    println!("{:>6} {:>7} {:>8} {:>22} {:>11} {:>9}", "layers", "neurons", "act", "weights", "L2", "seconds");
    for r in rows {
        let w: Vec<String> = r.weights.iter().map(|v| format!("{v:e}")).collect();
        let l2 = match (&r.l2, &r.error) {
            (Some(v), _) => format!("{v:.4e}"),
            (None, Some(_)) => "failed".into(),
            _ => "-".into(),
        };
        println!(
            "{:>6} {:>7} {:>8} {:>22} {:>11} {:>9.1}",
            r.layers,
            r.neurons,
            r.activation.name(),
            w.join(","),
            l2,
            r.wall_seconds
        );
    }
}

fn noise_config(sigma: f64) -> ExperimentConfig {
    let level = NoiseLevel::ALL.into_iter().find(|l| l.sigma() == sigma);
    let mut c = ExperimentConfig::lorenz_noise(level.unwrap_or(NoiseLevel::Low));
    if let ObservationSource::Synthetic { sigma: s, .. } = &mut c.observations {
        *s = sigma;
    }
    c
}

#[derive(Serialize)]
struct NoiseRow {
    sigma: f64,
    total_loss: f64,
    data_loss: f64,
    ode_loss: f64,
    ic_loss: f64,
    l2: f64,
    wall_seconds: f64,
    diverged: bool,
}

pub fn noise_study(sigmas: &[f64], o: &Overrides, workers: usize) -> CliResult<()> {
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
        return Err(CliError::Config(format!("noise level must be non-negative, got {s}")));
    }
    let root = o.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut configs = Vec::new();
    for &sigma in sigmas {
        let mut c = noise_config(sigma);
        o.apply(&mut c, false)?;
        c.output_dir = root.join(format!("sigma-{sigma}"));
        c.validate()?;
        configs.push(c);
    }

    let results: Vec<CliResult<TrainReport>> = {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new((0..configs.len()).map(|_| None).collect::<Vec<_>>());
        std::thread::scope(|s| {
            for _ in 0..workers.clamp(1, configs.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(c) = configs.get(i) else { break };
                    let r = train_one(c, &c.output_dir).and_then(|r| {
                        write_phase(&c.output_dir, &r)?;
                        Ok(r)
                    });
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
                });
            }
        });
        slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten().collect()
    };

    let mut rows = Vec::new();
    for (sigma, r) in sigmas.iter().zip(results) {
        let r = r?;
        print!("sigma {sigma}: ");
        print_summary(&r);
        rows.push(NoiseRow {
            sigma: *sigma,
            total_loss: r.final_loss.total,
            data_loss: r.final_loss.data,
            ode_loss: r.final_loss.ode,
            ic_loss: r.final_loss.ic,
            l2: r.final_l2.total,
            wall_seconds: r.wall_seconds,
            diverged: r.diverged,
        });
    }
    fs::create_dir_all(&root)?;
    let mut csv = String::from("sigma,total_loss,data_loss,ode_loss,ic_loss,l2,wall_seconds,diverged\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:.3},{}\n",
            r.sigma, r.total_loss, r.data_loss, r.ode_loss, r.ic_loss, r.l2, r.wall_seconds, r.diverged
        ));
    }
    let mut files = Vec::new();
    write(&root, "noise_summary.csv", &csv, &mut files)?;
    write_json(&root, "noise_summary.json", &rows, &mut files)?;
    let diverged = rows.iter().any(|r| r.diverged);
    write_manifest(&root, "noise-study", &files, diverged)?;
    println!("wrote {}", root.display());
    if diverged {
        return Err(CliError::Diverged("at least one noise level diverged".into()));
    }
    Ok(())
}

/// 3-d phase data plus an x–z projection for three-component systems.
fn write_phase(dir: &Path, r: &TrainReport) -> CliResult<()> {
    if r.problem.dim() != 3 {
        return Ok(());
    }
    let mut csv = String::from("t,x_pred,y_pred,z_pred,x_ref,y_ref,z_ref\n");
    for (i, t) in r.eval_times.iter().enumerate() {
        let (p, q) = (&r.prediction[i], &r.reference[i]);
        csv.push_str(&format!("{t},{},{},{},{},{},{}\n", p[0], p[1], p[2], q[0], q[1], q[2]));
    }
    fs::write(dir.join("phase.csv"), csv)?;
    let px: Vec<f64> = r.prediction.iter().map(|s| s[0]).collect();
    let rx: Vec<f64> = r.reference.iter().map(|s| s[0]).collect();
    let chart = Chart {
        title: "Phase portrait (x, z)".into(),
        x_label: "x".into(),
        y_label: "z".into(),
        log_y: false,
        series: vec![
            Series { label: "PINN".into(), xs: &px, ys: r.prediction.iter().map(|s| s[2]).collect(), dashed: false },
            Series { label: "reference".into(), xs: &rx, ys: r.reference.iter().map(|s| s[2]).collect(), dashed: true },
        ],
    };
    fs::write(dir.join("phase.svg"), chart.render())?;
    Ok(())
}

/// Summarize a previous run directory (or a `report.json` / `sweep.json`)
/// and redraw its plots.
pub fn report(path: &Path) -> CliResult<()> {
    let (dir, file) = if path.is_dir() {
        if path.join("report.json").exists() {
            (path.to_path_buf(), path.join("report.json"))
        } else if path.join("sweep.json").exists() {
            (path.to_path_buf(), path.join("sweep.json"))
        } else {
            return Err(CliError::Config(format!("{} has no report.json or sweep.json", path.display())));
        }
    } else {
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
    };
    let text = config::read(&file)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", file.display())))?;
    if value.is_array() {
        let rows: Vec<SweepRow> = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("{} is not a sweep result: {e}", file.display())))?;
        print_sweep(&rows);
        return Ok(());
    }
    // Diverged runs store non-finite losses as null, which the typed report
    // cannot hold; summarize those from the raw JSON.
    match serde_json::from_value::<TrainReport>(value.clone()) {
        Ok(r) => {
            print_summary(&r);
            for (name, svg) in train_charts(&r) {
                fs::write(dir.join(name), svg)?;
            }
        }
        Err(_) => {
            let get = |k: &str| value.get(k).cloned().unwrap_or(serde_json::Value::Null);
            if get("problem").is_null() {
                return Err(CliError::Config(format!("{} is not a training report", file.display())));
            }
            println!(
                "{}: diverged = {}, failure = {}",
                get("problem")["name"],
                get("diverged"),
                get("failure")
            );
        }
    }
    Ok(())
}
