//! Classical integrators for reference trajectories, and synthetic observations.

mod dopri;
mod noise;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::OdeProblem;

pub use dopri::{adaptive_rk45_integrate, Rk45Options};
pub use noise::{add_gaussian_noise, NoiseLevel, ObservationSet};

/// A first-order system `y′ = f(t, y)`.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl Dynamics for OdeProblem {
    fn state_dim(&self) -> usize {
        OdeProblem::state_dim(self)
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        OdeProblem::rhs(self, t, y, dy)
    }
}

/// Closure-backed [`Dynamics`].
pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnDynamics<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDynamics { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> Dynamics for FnDynamics<F> {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Sampled solution: `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub info: SolverInfo,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    /// Keep only the first `k` state entries (drops rates after a reduction).
    pub fn truncated(mut self, k: usize) -> Self {
        for s in &mut self.states {
            s.truncate(k);
        }
        self
    }

    /// CSV with a `t` column followed by one column per name.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for v in s.iter().take(names.len()) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Classical fourth-order Runge–Kutta with `n_steps` steps of size `h`.
pub fn rk4_integrate<D: Dynamics + ?Sized>(
    sys: &D,
    t0: f64,
    y0: &[f64],
    h: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    let n = sys.state_dim();
    if y0.len() != n {
        return Err(Error::Contract(format!("initial state has {} entries, system has {n}", y0.len())));
    }
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    times.push(t0);
    states.push(y.clone());
    for step in 0..n_steps {
        let t = t0 + step as f64 * h;
        sys.rhs(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { last_good_t: t });
        }
        times.push(t0 + (step + 1) as f64 * h);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        info: SolverInfo { method: "rk4".into(), accepted_steps: n_steps, ..Default::default() },
    })
}

/// Component values of `problem` at `times`: closed form when available,
/// otherwise Dormand–Prince with `opts`.
pub fn reference_solution(problem: &OdeProblem, times: &[f64], opts: &Rk45Options) -> Result<Trajectory> {
    problem.validate()?;
    if let Some(first) = problem.analytic(problem.t_start) {
        debug_assert_eq!(first.len(), problem.dim());
        let states = times.iter().map(|&t| problem.analytic(t).unwrap()).collect();
        return Ok(Trajectory {
            times: times.to_vec(),
            states,
            info: SolverInfo { method: "analytic".into(), ..Default::default() },
        });
    }
    let traj = adaptive_rk45_integrate(problem, problem.t_start, &problem.initial_state(), times, opts)?;
    Ok(traj.truncated(problem.dim()))
}

/// `n` equally spaced points on `[a, b]`, both endpoints included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}
