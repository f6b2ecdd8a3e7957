use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::network::Activation;

/// Cartesian product of architectures and weight sets over a base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weight_sets: Vec<Vec<f64>>,
}

impl SweepGrid {
    /// Cells in row-major order: layers, neurons, activation, weights.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &layers in &self.layers {
            for &neurons in &self.neurons {
                for &activation in &self.activations {
                    for w in &self.weight_sets {
                        let mut c = self.base.clone();
                        c.network.layers = layers;
                        c.network.neurons = neurons;
                        c.network.activation = activation;
                        c.training.loss_weights = w.clone();
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Outcome of one sweep cell. Failed cells carry `error` and no losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub l2: Option<f64>,
    pub data: Option<f64>,
    pub ode: Option<f64>,
    pub ic: Option<f64>,
    pub total: Option<f64>,
    pub wall_seconds: f64,
    pub diverged: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_run(c: &ExperimentConfig) -> Self {
        let mut row = SweepRow {
            layers: c.network.layers,
            neurons: c.network.neurons,
            activation: c.network.activation,
            weights: c.training.loss_weights.clone(),
            l2: None,
            data: None,
            ode: None,
            ic: None,
            total: None,
            wall_seconds: 0.0,
            diverged: false,
            error: None,
        };
        match c.run() {
            Ok(r) => {
                row.l2 = Some(r.final_l2.total);
                row.data = Some(r.final_loss.data);
                row.ode = Some(r.final_loss.ode);
                row.ic = Some(r.final_loss.ic);
                row.total = Some(r.final_loss.total);
                row.wall_seconds = r.wall_seconds;
                row.diverged = r.diverged;
                row.error = r.failure;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn csv_header() -> &'static str {
        "layers,neurons,activation,weights,l2,data_loss,ode_loss,ic_loss,total_loss,wall_seconds,diverged,error"
    }

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let weights: Vec<String> = self.weights.iter().map(f64::to_string).collect();
        let error = self.error.as_deref().unwrap_or("").replace('"', "'");
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},\"[{}]\",{},{},{},{},{},{:.3},{},\"{}\"",
            self.layers,
            self.neurons,
            self.activation.name(),
            weights.join(";"),
            opt(self.l2),
            opt(self.data),
            opt(self.ode),
            opt(self.ic),
            opt(self.total),
            self.wall_seconds,
            self.diverged,
            error
        );
        s
    }
}

/// Run every cell on up to `workers` threads. Rows come back in cell order
/// regardless of scheduling, and a failing cell does not stop the others.
pub fn run_sweep(grid: &SweepGrid, workers: usize) -> Vec<SweepRow> {
    let cells = grid.cells();
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let row = SweepRow::from_run(cell);
                rows.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(row);
            });
        }
    });
    rows.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten().collect()
}
