//! Fully connected networks `t ↦ û(t)` with Taylor-mode evaluation.
//!
//! Hidden layers apply `σ(W·h + b)`; the output layer is affine. An optional
//! sinusoidal feature map replaces the raw time input, and per-component
//! output transforms can pin initial conditions exactly or force positivity.

mod batch;
mod forward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Taylor2, Unary};
use crate::error::{Error, Result};
use crate::random::NormalStream;

pub use batch::{BatchNet, Comps};
pub use forward::{apply_transform, body_generic, feature_series, forward, forward_generic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Sine,
    Swish,
}

impl Activation {
    pub fn unary(self) -> Unary {
        match self {
            Activation::Tanh => Unary::Tanh,
            Activation::Sigmoid => Unary::Sigmoid,
            Activation::Relu => Unary::Relu,
            Activation::Sine => Unary::Sin,
            Activation::Swish => Unary::Swish,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Sine => "sine",
            Activation::Swish => "swish",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "sine" | "sin" => Ok(Activation::Sine),
            "swish" => Ok(Activation::Swish),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initializer {
    GlorotNormal,
    GlorotUniform,
}

/// Fixed embedding of the time input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureMap {
    Identity,
    /// `t ↦ (sin t, sin 2t, …, sin nt)`, optionally followed by raw `t`.
    Sinusoidal {
        n: usize,
        #[serde(default)]
        include_raw: bool,
    },
}

impl FeatureMap {
    pub const DEFAULT_FREQUENCIES: usize = 10;

    pub fn sinusoidal(n: usize) -> Self {
        FeatureMap::Sinusoidal { n, include_raw: false }
    }

    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::Identity => 1,
            FeatureMap::Sinusoidal { n, include_raw } => n + include_raw as usize,
        }
    }
}

/// Affine map `(t − shift)·scale` applied to time before the feature layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub shift: f64,
    pub scale: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        InputScaling { shift: 0.0, scale: 1.0 }
    }
}

impl InputScaling {
    /// Maps `[a, b]` onto `[0, b − a]` measured in units of `unit`.
    pub fn time_unit(a: f64, unit: f64) -> Self {
        InputScaling { shift: a, scale: 1.0 / unit }
    }

    pub fn is_identity(&self) -> bool {
        *self == InputScaling::default()
    }

    pub fn apply(&self, t: Taylor2) -> Taylor2 {
        t.offset(-self.shift).scale(self.scale)
    }
}

/// Transform applied to one raw network output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComponentTransform {
    Identity,
    /// `u0 + (t − t0)·N(t)`, or `u0 + v0·(t − t0) + (t − t0)²·N(t)` when a
    /// velocity is given.
    HardIc {
        t0: f64,
        u0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v0: Option<f64>,
    },
    /// `softplus(N(t))`.
    Positivity,
}

/// Per-component output transforms; empty means identity everywhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputTransform(pub Vec<ComponentTransform>);

impl OutputTransform {
    pub fn identity() -> Self {
        OutputTransform(Vec::new())
    }

    pub fn get(&self, j: usize) -> ComponentTransform {
        self.0.get(j).copied().unwrap_or(ComponentTransform::Identity)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|c| *c == ComponentTransform::Identity)
    }
}

/// Architecture of a network `R → R^{d_out}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Width of each hidden layer; the length is the depth.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub output_dim: usize,
    pub initializer: Initializer,
    pub feature_map: FeatureMap,
    #[serde(default, skip_serializing_if = "InputScaling::is_identity")]
    pub input_scaling: InputScaling,
    #[serde(default, skip_serializing_if = "OutputTransform::is_identity")]
    pub output_transform: OutputTransform,
}

impl NetworkSpec {
    /// `depth` hidden layers of `width` neurons, Glorot-normal, identity maps.
    pub fn new(depth: usize, width: usize, activation: Activation, output_dim: usize) -> Self {
        NetworkSpec {
            widths: vec![width; depth],
            activation,
            output_dim,
            initializer: Initializer::GlorotNormal,
            feature_map: FeatureMap::Identity,
            input_scaling: InputScaling::default(),
            output_transform: OutputTransform::identity(),
        }
    }

    pub fn with_features(mut self, map: FeatureMap) -> Self {
        self.feature_map = map;
        self
    }

    pub fn with_input_scaling(mut self, s: InputScaling) -> Self {
        self.input_scaling = s;
        self
    }

    /// Feature-layer values at input series `t`, after input scaling.
    pub fn features(&self, t: Taylor2) -> Vec<Taylor2> {
        feature_series(&self.feature_map, self.input_scaling.apply(t))
    }

    pub fn with_transform(mut self, t: OutputTransform) -> Self {
        self.output_transform = t;
        self
    }

    pub fn with_initializer(mut self, init: Initializer) -> Self {
        self.initializer = init;
        self
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Raw input dimension (time only).
    pub fn input_dim(&self) -> usize {
        1
    }

    /// Layer sizes from the feature layer to the output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.widths.len() + 2);
        d.push(self.feature_map.dim());
        d.extend_from_slice(&self.widths);
        d.push(self.output_dim);
        d
    }

    /// Number of entries in the flat parameter vector.
    pub fn param_count(&self) -> usize {
        self.layer_dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offsets of `(W, b)` for each affine layer in the flat vector.
    pub fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        for w in self.layer_dims().windows(2) {
            out.push((at, at + w[0] * w[1]));
            at += w[0] * w[1] + w[1];
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Config("network needs at least one hidden layer".into()));
        }
        if self.widths.contains(&0) || self.output_dim == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if let FeatureMap::Sinusoidal { n: 0, .. } = self.feature_map {
            return Err(Error::Config("sinusoidal feature map needs n ≥ 1".into()));
        }
        let s = self.input_scaling;
        if !(s.shift.is_finite() && s.scale.is_finite() && s.scale != 0.0) {
            return Err(Error::Config("input scaling must be finite with a non-zero scale".into()));
        }
        if self.output_transform.0.len() > self.output_dim {
            return Err(Error::Config(format!(
                "{} output transforms for {} outputs",
                self.output_transform.0.len(),
                self.output_dim
            )));
        }
        Ok(())
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        let n = self.param_count();
        if theta.len() != n {
            return Err(Error::Contract(format!("expected {n} parameters, got {}", theta.len())));
        }
        Ok(())
    }
}

/// Flat trainable parameters: `W¹, b¹, W², b², …` with row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkParams(pub Vec<f64>);

impl NetworkParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Glorot-initialized weights, zero biases; deterministic in `seed`.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> NetworkParams {
    let mut rng = NormalStream::new(seed);
    let mut theta = Vec::with_capacity(spec.param_count());
    for w in spec.layer_dims().windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let denom = (fan_in + fan_out) as f64;
        for _ in 0..fan_in * fan_out {
            let x = match spec.initializer {
                Initializer::GlorotNormal => rng.normal() * (2.0 / denom).sqrt(),
                Initializer::GlorotUniform => {
                    let limit = (6.0 / denom).sqrt();
                    (2.0 * rng.uniform() - 1.0) * limit
                }
            };
            theta.push(x);
        }
        theta.extend(std::iter::repeat_n(0.0, fan_out));
    }
    NetworkParams(theta)
}
