//! Declarative experiment descriptions and the runner shared by the CLI and
//! the test suites.

mod presets;
mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{add_gaussian_noise, reference_solution, uniform_grid, ObservationSet, Rk45Options};
use crate::network::{
    Activation, ComponentTransform, FeatureMap, Initializer, InputScaling, NetworkSpec, OutputTransform,
};
use crate::pinn::{train, CollocationStrategy, LossWeights, TrainConfig, TrainReport};
use crate::problems::OdeProblem;

pub use presets::{PRESET_NAMES, SWEEP_ACTIVATIONS, SWEEP_LAYERS, SWEEP_NEURONS};
pub use sweep::{run_sweep, SweepGrid, SweepRow};

/// Network architecture as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    pub initializer: Initializer,
    /// Number of `sin(kt)` features; 0 feeds raw time.
    pub features: usize,
    /// Pin the initial conditions through the output transform.
    pub hard_ic: bool,
    /// Measure network input time in this unit, from the domain start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_unit: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layers: 3,
            neurons: 40,
            activation: Activation::Tanh,
            initializer: Initializer::GlorotNormal,
            features: 0,
            hard_ic: false,
            time_unit: None,
        }
    }
}

/// Optimizer schedule and loss setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Adam iterations.
    pub epochs: usize,
    pub learning_rate: f64,
    /// L-BFGS iteration cap after Adam; 0 disables the stage.
    pub lbfgs_iters: usize,
    pub collocation: usize,
    pub collocation_strategy: CollocationStrategy,
    /// Weight list (see [`LossWeights::from_list`]); empty means all ones.
    pub loss_weights: Vec<f64>,
    pub eval_points: usize,
    pub l2_every: usize,
    pub divergence_threshold: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingConfig {
            epochs: t.adam_iters,
            learning_rate: t.learning_rate,
            lbfgs_iters: t.lbfgs.max_iters,
            collocation: t.collocation,
            collocation_strategy: t.collocation_strategy,
            loss_weights: Vec::new(),
            eval_points: t.eval_points,
            l2_every: t.l2_every,
            divergence_threshold: t.divergence_threshold,
        }
    }
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservationSource {
    #[default]
    None,
    /// `n` equally spaced samples of the reference solution plus Gaussian
    /// noise of standard deviation `sigma`.
    Synthetic {
        sigma: f64,
        #[serde(default = "default_samples")]
        n: usize,
        /// Noise seed; the experiment seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// CSV with a header line and columns `t, component…`.
    File { path: PathBuf },
}

fn default_samples() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One training run, fully described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Parameter overrides by name (`rho`, `R`, `t_end`, `x0`, …).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub observations: ObservationSource,
}

impl ExperimentConfig {
    pub fn new(problem: &str) -> Self {
        ExperimentConfig {
            problem: problem.to_string(),
            seed: 0,
            output_dir: default_output_dir(),
            overrides: BTreeMap::new(),
            network: NetworkConfig::default(),
            training: TrainingConfig::default(),
            observations: ObservationSource::None,
        }
    }

    /// The preset problem with overrides applied.
    pub fn problem(&self) -> Result<OdeProblem> {
        let mut p = OdeProblem::preset(&self.problem)?;
        for (k, v) in &self.overrides {
            p.set_param(k, *v)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn network_spec(&self, problem: &OdeProblem) -> Result<NetworkSpec> {
        let n = &self.network;
        let mut spec = NetworkSpec::new(n.layers, n.neurons, n.activation, problem.dim()).with_initializer(n.initializer);
        if n.features > 0 {
            spec = spec.with_features(FeatureMap::sinusoidal(n.features));
        }
        if n.hard_ic {
            let t0 = problem.t_start;
            let tr = (0..problem.dim())
                .map(|j| ComponentTransform::HardIc { t0, u0: problem.u0[j], v0: problem.v0.get(j).copied() })
                .collect();
            spec = spec.with_transform(OutputTransform(tr));
        }
        if let Some(unit) = n.time_unit {
            if !(unit > 0.0 && unit.is_finite()) {
                return Err(Error::Config(format!("time unit must be positive, got {unit}")));
            }
            spec = spec.with_input_scaling(InputScaling::time_unit(problem.t_start, unit));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self, problem: &OdeProblem) -> Result<TrainConfig> {
        let t = &self.training;
        if !(t.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", t.learning_rate)));
        }
        let weights = if t.loss_weights.is_empty() {
            LossWeights::unit()
        } else {
            LossWeights::from_list(&t.loss_weights, problem)?
        };
        let mut cfg = TrainConfig {
            seed: self.seed,
            adam_iters: t.epochs,
            learning_rate: t.learning_rate,
            collocation: t.collocation,
            collocation_strategy: t.collocation_strategy,
            weights,
            eval_points: t.eval_points,
            l2_every: t.l2_every,
            divergence_threshold: t.divergence_threshold,
            ..TrainConfig::default()
        };
        cfg.lbfgs.max_iters = t.lbfgs_iters;
        Ok(cfg)
    }

    pub fn load_observations(&self, problem: &OdeProblem) -> Result<Option<ObservationSet>> {
        match &self.observations {
            ObservationSource::None => Ok(None),
            ObservationSource::Synthetic { sigma, n, seed } => {
                if *n == 0 {
                    return Err(Error::Config("synthetic observations need n ≥ 1".into()));
                }
                let times = uniform_grid(problem.t_start, problem.t_end, *n);
                let clean = reference_solution(problem, &times, &Rk45Options::default())?;
                add_gaussian_noise(&clean, *sigma, seed.unwrap_or(self.seed)).map(Some)
            }
            ObservationSource::File { path } => read_observations(path).map(Some),
        }
    }

    /// Check every part without training.
    pub fn validate(&self) -> Result<()> {
        let p = self.problem()?;
        self.network_spec(&p)?;
        self.train_config(&p)?.weights.validate(&p)?;
        if let ObservationSource::Synthetic { sigma, .. } = self.observations {
            if !(sigma >= 0.0) {
                return Err(Error::Config(format!("noise level must be non-negative, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<TrainReport> {
        let p = self.problem()?;
        let spec = self.network_spec(&p)?;
        let cfg = self.train_config(&p)?;
        let obs = self.load_observations(&p)?;
        train(&p, &spec, obs.as_ref(), &cfg)
    }
}

/// Parse `t,c1,c2,…` CSV (header line required).
pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read observations from {}: {e}", path.display())))?;
    parse_observations(&text)
}

pub fn parse_observations(text: &str) -> Result<ObservationSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("observation file is empty".into()))?;
    let width = header.split(',').count();
    if width < 2 {
        return Err(Error::Config("observation header needs a time column and at least one component".into()));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("observation row {}: {e}", i + 1)))?;
        if row.len() != width {
            return Err(Error::Config(format!("observation row {} has {} columns, expected {width}", i + 1, row.len())));
        }
        times.push(row[0]);
        values.push(row[1..].to_vec());
    }
    let obs = ObservationSet { times, values, sigma: 0.0 };
    obs.validate()?;
    Ok(obs)
}
