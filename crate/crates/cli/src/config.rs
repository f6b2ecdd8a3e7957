//! TOML config files and command-line overrides.

use std::path::{Path, PathBuf};

use pinn_ode::experiment::{ExperimentConfig, SweepGrid};
use pinn_ode::network::Activation;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "PINN_ODE_SEED";

pub fn to_toml<T: serde::Serialize>(value: &T) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::Internal(format!("cannot serialize config: {e}")))
}

/// Parse an experiment config; the flag tells whether the file set `seed`.
pub fn parse_experiment(text: &str) -> CliResult<(ExperimentConfig, bool)> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    let has_seed = table.contains_key("seed");
    let cfg = toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    Ok((cfg, has_seed))
}

pub fn parse_sweep(text: &str) -> CliResult<SweepGrid> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("invalid sweep config: {e}")))
}

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| CliError::Config(format!("bad {what} '{p}': {e}"))))
        .collect()
}

pub fn parse_activation(s: &str) -> CliResult<Activation> {
    s.parse().map_err(|e: pinn_ode::Error| CliError::Config(e.to_string()))
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV} must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Flags shared by commands that build one experiment. Unset flags leave
/// the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lbfgs_iters: Option<usize>,
    pub learning_rate: Option<f64>,
    pub layers: Option<usize>,
    pub neurons: Option<usize>,
    pub activation: Option<String>,
    pub loss_weights: Option<String>,
    pub colloc: Option<usize>,
    pub t_end: Option<f64>,
    pub out: Option<PathBuf>,
    pub quick: bool,
}

/// Adam and L-BFGS caps under `--quick`.
pub const QUICK_EPOCHS: usize = 2000;
pub const QUICK_LBFGS: usize = 500;

impl Overrides {
    /// Base config from `--config` or `--preset` (or defaults for
    /// `--problem`), then flags on top. Seed precedence: flag, file,
    /// environment, zero.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let (mut cfg, file_seed) = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(CliError::Config("--config and --preset are mutually exclusive".into())),
            (Some(path), None) => parse_experiment(&read(path)?)?,
            (None, Some(name)) => (ExperimentConfig::preset(name)?, false),
            (None, None) => {
                let name = self
                    .problem
                    .as_deref()
                    .ok_or_else(|| CliError::Config("one of --problem, --config or --preset is required".into()))?;
                (ExperimentConfig::new(name), false)
            }
        };
        self.apply(&mut cfg, file_seed)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, file_seed: bool) -> CliResult<()> {
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        match self.seed {
            Some(s) => cfg.seed = s,
            None if !file_seed => {
                if let Some(s) = env_seed()? {
                    cfg.seed = s;
                }
            }
            None => {}
        }
        if let Some(v) = self.epochs {
            cfg.training.epochs = v;
        }
        if let Some(v) = self.lbfgs_iters {
            cfg.training.lbfgs_iters = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.training.learning_rate = v;
        }
        if let Some(v) = self.layers {
            cfg.network.layers = v;
        }
        if let Some(v) = self.neurons {
            cfg.network.neurons = v;
        }
        if let Some(a) = &self.activation {
            cfg.network.activation = parse_activation(a)?;
        }
        if let Some(w) = &self.loss_weights {
            cfg.training.loss_weights = parse_list(w, "loss weight")?;
        }
        if let Some(v) = self.colloc {
            cfg.training.collocation = v;
        }
        if let Some(v) = self.t_end {
            cfg.overrides.insert("t_end".into(), v);
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if self.quick {
            cfg.training.epochs = cfg.training.epochs.min(QUICK_EPOCHS);
            cfg.training.lbfgs_iters = cfg.training.lbfgs_iters.min(QUICK_LBFGS);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips_through_toml() {
        for name in pinn_ode::experiment::PRESET_NAMES {
            let c = ExperimentConfig::preset(name).unwrap();
            let text = to_toml(&c).unwrap();
            assert_eq!(parse_experiment(&text).unwrap().0, c, "{text}");
        }
        let g = SweepGrid::rlc(false);
        assert_eq!(parse_sweep(&to_toml(&g).unwrap()).unwrap(), g);
    }

    #[test]
    fn only_problem_is_required() {
        let (c, has_seed) = parse_experiment("problem = \"lorenz\"\n").unwrap();
        assert_eq!(c, ExperimentConfig::new("lorenz"));
        assert!(!has_seed);
        assert!(parse_experiment("seed = 3\n").is_err());
        assert!(parse_experiment("problem = \"lorenz\"\nbogus = 1\n").is_err());
        assert!(parse_experiment("problem = \"lorenz\"\nseed = 4\n").unwrap().1);
    }

    #[test]
    fn flags_win() {
        let o = Overrides {
            preset: Some("lv-features".into()),
            epochs: Some(7),
            activation: Some("tanh".into()),
            loss_weights: Some("1, 2, 3".into()),
            t_end: Some(0.5),
            seed: Some(9),
            ..Default::default()
        };
        let c = o.resolve().unwrap();
        assert_eq!(c.training.epochs, 7);
        assert_eq!(c.network.activation, Activation::Tanh);
        assert_eq!(c.network.features, 10);
        assert_eq!(c.training.loss_weights, [1.0, 2.0, 3.0]);
        assert_eq!(c.problem().unwrap().t_end, 0.5);
        assert_eq!(c.seed, 9);
        let quick = Overrides { preset: Some("mass-spring-clean".into()), quick: true, ..Default::default() };
        let c = quick.resolve().unwrap();
        assert_eq!((c.training.epochs, c.training.lbfgs_iters), (QUICK_EPOCHS, QUICK_LBFGS));
        let bad = Overrides { problem: Some("lorenz".into()), activation: Some("gelu".into()), ..Default::default() };
        assert!(matches!(bad.resolve(), Err(CliError::Config(_))));
    }
}
