//! Composite physics-informed loss, training loop and error metrics.

mod loss;
mod metrics;
mod objective;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::uniform_grid;
use crate::problems::OdeProblem;
use crate::random::NormalStream;

pub use loss::{data_loss, ic_loss, ode_residual_loss, total_loss, total_loss_reference};
pub use metrics::{l2_relative_error, relative_l2, L2Error};
pub use objective::PinnObjective;
pub use train::{predict, train, L2Record, LossRecord, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollocationStrategy {
    #[default]
    UniformGrid,
    UniformRandom,
}

/// Times at which the ODE residual is enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationSet {
    pub points: Vec<f64>,
    pub strategy: CollocationStrategy,
    pub seed: u64,
}

impl CollocationSet {
    pub fn new(strategy: CollocationStrategy, a: f64, b: f64, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("collocation set must contain at least one point".into()));
        }
        if !(b > a) {
            return Err(Error::Config(format!("collocation interval [{a}, {b}] is empty")));
        }
        let points = match strategy {
            CollocationStrategy::UniformGrid => uniform_grid(a, b, n),
            CollocationStrategy::UniformRandom => {
                let mut rng = NormalStream::new(seed);
                let mut p: Vec<f64> = (0..n).map(|_| a + (b - a) * rng.uniform()).collect();
                p.sort_by(f64::total_cmp);
                p
            }
        };
        Ok(CollocationSet { points, strategy, seed })
    }

    pub fn grid(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(CollocationStrategy::UniformGrid, a, b, n, 0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Global and per-component loss weights. Empty per-component lists mean 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub data: f64,
    pub ode: f64,
    pub ic: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_components: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ode_components: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ic_components: Vec<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::unit()
    }
}

impl LossWeights {
    pub fn unit() -> Self {
        LossWeights {
            data: 1.0,
            ode: 1.0,
            ic: 1.0,
            data_components: vec![],
            ode_components: vec![],
            ic_components: vec![],
        }
    }

    /// Interpret a flat weight list:
    ///
    /// * `[ode, ic]`
    /// * `[ode, data, ic]`
    /// * `[ode, data, ic_1, …, ic_s]`, one entry per initial condition
    pub fn from_list(list: &[f64], problem: &OdeProblem) -> Result<Self> {
        let n_ic = problem.ic_conditions().len();
        let mut w = Self::unit();
        match list.len() {
            2 => {
                w.ode = list[0];
                w.ic = list[1];
            }
            3 => {
                w.ode = list[0];
                w.data = list[1];
                w.ic = list[2];
            }
            len if len == 2 + n_ic => {
                w.ode = list[0];
                w.data = list[1];
                w.ic_components = list[2..].to_vec();
            }
            len => {
                return Err(Error::Config(format!(
                    "{len} loss weights given; {} takes 2 [ode, ic], 3 [ode, data, ic] or {} [ode, data, one per initial condition]",
                    problem.name,
                    2 + n_ic
                )))
            }
        }
        w.validate(problem)?;
        Ok(w)
    }

    pub fn validate(&self, problem: &OdeProblem) -> Result<()> {
        let all = [self.data, self.ode, self.ic]
            .into_iter()
            .chain(self.data_components.iter().copied())
            .chain(self.ode_components.iter().copied())
            .chain(self.ic_components.iter().copied());
        for v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("loss weights must be finite and non-negative, got {v}")));
            }
        }
        let check = |name: &str, list: &[f64], want: usize| {
            if list.is_empty() || list.len() == want {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} weights have {} entries, expected {want}", list.len())))
            }
        };
        check("data", &self.data_components, problem.dim())?;
        check("ODE", &self.ode_components, problem.dim())?;
        check("initial-condition", &self.ic_components, problem.ic_conditions().len())
    }

    /// Every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        LossWeights { data: self.data * c, ode: self.ode * c, ic: self.ic * c, ..self.clone() }
    }

    pub fn data_component(&self, j: usize) -> f64 {
        self.data_components.get(j).copied().unwrap_or(1.0)
    }

    pub fn ode_component(&self, j: usize) -> f64 {
        self.ode_components.get(j).copied().unwrap_or(1.0)
    }

    pub fn ic_component(&self, k: usize) -> f64 {
        self.ic_components.get(k).copied().unwrap_or(1.0)
    }
}

/// Loss terms at one parameter vector. `total` is the weighted sum of the
/// other three under the global weights.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data: f64,
    pub ode: f64,
    pub ic: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(weights: &LossWeights, data: f64, ode: f64, ic: f64) -> Self {
        LossBreakdown { data, ode, ic, total: weights.data * data + weights.ode * ode + weights.ic * ic }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoints_and_random_is_seeded() {
        let g = CollocationSet::grid(0.0, 2.0, 5).unwrap();
        assert_eq!(g.points, [0.0, 0.5, 1.0, 1.5, 2.0]);
        let a = CollocationSet::new(CollocationStrategy::UniformRandom, 1.0, 3.0, 50, 9).unwrap();
        let b = CollocationSet::new(CollocationStrategy::UniformRandom, 1.0, 3.0, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|t| (1.0..=3.0).contains(t)));
        assert!(CollocationSet::grid(0.0, 1.0, 0).is_err());
        assert!(CollocationSet::grid(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn weight_list_mapping() {
        let rlc = OdeProblem::preset("rlc").unwrap();
        let w = LossWeights::from_list(&[1e-7, 1e3, 1.0, 1.0], &rlc).unwrap();
        assert_eq!((w.ode, w.data, w.ic), (1e-7, 1e3, 1.0));
        assert_eq!(w.ic_components, [1.0, 1.0]);
        let ms = OdeProblem::preset("mass-spring").unwrap();
        let w = LossWeights::from_list(&[1.0, 1.0], &ms).unwrap();
        assert_eq!((w.ode, w.ic), (1.0, 1.0));
        let w = LossWeights::from_list(&[2.0, 3.0, 4.0], &ms).unwrap();
        assert_eq!((w.ode, w.data, w.ic), (2.0, 3.0, 4.0));
        assert!(LossWeights::from_list(&[1.0; 5], &ms).is_err());
        assert!(LossWeights::from_list(&[1.0, -1.0], &ms).is_err());
        assert!(LossWeights::from_list(&[1.0; 6], &ms).is_ok());
    }

    #[test]
    fn component_lengths_are_checked() {
        let lorenz = OdeProblem::preset("lorenz").unwrap();
        let mut w = LossWeights::unit();
        w.ode_components = vec![1.0, 2.0];
        assert!(w.validate(&lorenz).is_err());
        w.ode_components = vec![1.0, 2.0, 3.0];
        assert!(w.validate(&lorenz).is_ok());
    }
}
