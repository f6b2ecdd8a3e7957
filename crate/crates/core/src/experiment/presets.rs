use super::{ExperimentConfig, NetworkConfig, ObservationSource, SweepGrid, TrainingConfig};
use crate::error::{Error, Result};
use crate::integrate::NoiseLevel;
use crate::network::Activation;

/// Named configurations reproducing the benchmark studies.
pub const PRESET_NAMES: [&str; 8] = [
    "mass-spring-clean",
    "rlc-weighted",
    "rlc-unit",
    "lv-plain",
    "lv-features",
    "lorenz-noise-low",
    "lorenz-noise-medium",
    "lorenz-noise-high",
];

pub const SWEEP_LAYERS: [usize; 3] = [1, 3, 9];
pub const SWEEP_NEURONS: [usize; 4] = [5, 25, 75, 100];
pub const SWEEP_ACTIVATIONS: [Activation; 4] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Sine];

const RLC_WEIGHTED: [f64; 4] = [1e-7, 1e3, 1.0, 1.0];
const RLC_UNIT: [f64; 4] = [1.0; 4];

fn net(layers: usize, neurons: usize, activation: Activation) -> NetworkConfig {
    NetworkConfig { layers, neurons, activation, ..NetworkConfig::default() }
}

fn schedule(epochs: usize, learning_rate: f64, lbfgs_iters: usize, collocation: usize, weights: &[f64]) -> TrainingConfig {
    TrainingConfig {
        epochs,
        learning_rate,
        lbfgs_iters,
        collocation,
        loss_weights: weights.to_vec(),
        ..TrainingConfig::default()
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "mass-spring-clean" => Ok(Self::mass_spring_clean()),
            "rlc-weighted" => Ok(Self::rlc(3, 25, Activation::Sine, &RLC_WEIGHTED)),
            "rlc-unit" => Ok(Self::rlc(3, 25, Activation::Sine, &RLC_UNIT)),
            "lv-plain" => Ok(Self::lotka_volterra(false)),
            "lv-features" => Ok(Self::lotka_volterra(true)),
            "lorenz-noise-low" => Ok(Self::lorenz_noise(NoiseLevel::Low)),
            "lorenz-noise-medium" => Ok(Self::lorenz_noise(NoiseLevel::Medium)),
            "lorenz-noise-high" => Ok(Self::lorenz_noise(NoiseLevel::High)),
            other => Err(Error::Config(format!(
                "unknown experiment preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Coupled oscillators without data: 3×40 tanh, Adam then L-BFGS.
    pub fn mass_spring_clean() -> Self {
        ExperimentConfig {
            network: net(3, 40, Activation::Tanh),
            training: schedule(50_000, 1e-3, 15_000, 400, &[1.0, 1.0]),
            ..Self::new("mass-spring")
        }
    }

    /// Free RLC response fitted to 100 clean samples with Adam only.
    ///
    /// Network time is measured in units of `√(LC)` (1 ms for the preset), so
    /// one oscillation spans about six input units.
    pub fn rlc(layers: usize, neurons: usize, activation: Activation, weights: &[f64]) -> Self {
        ExperimentConfig {
            network: NetworkConfig { time_unit: Some(1e-3), ..net(layers, neurons, activation) },
            training: schedule(100_000, 1e-4, 0, 400, weights),
            observations: ObservationSource::Synthetic { sigma: 0.0, n: 100, seed: None },
            ..Self::new("rlc")
        }
    }

    /// Predator-prey with exact initial conditions, optionally through a
    /// ten-frequency `sin(kt)` feature layer.
    pub fn lotka_volterra(features: bool) -> Self {
        ExperimentConfig {
            network: NetworkConfig {
                hard_ic: true,
                features: if features { 10 } else { 0 },
                ..net(6, 64, Activation::Sine)
            },
            training: schedule(20_000, 1e-3, 15_000, 400, &[1.0, 1.0, 1.0]),
            ..Self::new("lotka-volterra")
        }
    }

    /// Lorenz fitted to 100 noisy samples per component; larger networks
    /// and budgets at higher noise.
    pub fn lorenz_noise(level: NoiseLevel) -> Self {
        let (layers, neurons, colloc, epochs) = match level {
            NoiseLevel::Low => (3, 40, 400, 50_000),
            NoiseLevel::Medium => (4, 50, 500, 75_000),
            NoiseLevel::High => (5, 60, 600, 100_000),
        };
        ExperimentConfig {
            network: net(layers, neurons, Activation::Tanh),
            training: schedule(epochs, 1e-3, 15_000, colloc, &[1.0, 1.0, 1.0]),
            observations: ObservationSource::Synthetic { sigma: level.sigma(), n: 100, seed: None },
            ..Self::new("lorenz")
        }
    }
}

impl SweepGrid {
    /// Layers × neurons × activations × the two RLC weight sets. The quick
    /// grid keeps only 3×25 sine.
    pub fn rlc(quick: bool) -> Self {
        let base = ExperimentConfig::rlc(3, 25, Activation::Sine, &RLC_WEIGHTED);
        let weight_sets = vec![RLC_WEIGHTED.to_vec(), RLC_UNIT.to_vec()];
        if quick {
            SweepGrid { base, layers: vec![3], neurons: vec![25], activations: vec![Activation::Sine], weight_sets }
        } else {
            SweepGrid {
                base,
                layers: SWEEP_LAYERS.to_vec(),
                neurons: SWEEP_NEURONS.to_vec(),
                activations: SWEEP_ACTIVATIONS.to_vec(),
                weight_sets,
            }
        }
    }
}
