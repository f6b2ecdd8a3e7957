use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::random::NormalStream;

/// Observed component values: `values[i][j]` is component `j` at `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub sigma: f64,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn components(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::Config(format!(
                "{} observation times but {} value rows",
                self.times.len(),
                self.values.len()
            )));
        }
        let d = self.components();
        if self.values.iter().any(|r| r.len() != d) {
            return Err(Error::Config("observation rows have differing lengths".into()));
        }
        if self.times.iter().chain(self.values.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("observations contain non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Low,
    Medium,
    High,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 3] = [NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High];

    pub fn sigma(self) -> f64 {
        match self {
            NoiseLevel::Low => 0.2,
            NoiseLevel::Medium => 1.0,
            NoiseLevel::High => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseLevel::Low => "low",
            NoiseLevel::Medium => "medium",
            NoiseLevel::High => "high",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseLevel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise level '{s}' (low, medium, high)")))
    }
}

/// Add independent `σ·N(0, 1)` noise to every sample, row by row.
pub fn add_gaussian_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Result<ObservationSet> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("noise level must be a finite non-negative number, got {sigma}")));
    }
    let mut rng = NormalStream::new(seed);
    let values = traj
        .states
        .iter()
        .map(|row| row.iter().map(|&v| if sigma == 0.0 { v } else { v + sigma * rng.normal() }).collect())
        .collect();
    Ok(ObservationSet { times: traj.times.clone(), values, sigma })
}
