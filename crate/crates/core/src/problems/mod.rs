//! The four benchmark ODE systems, their presets and closed-form solutions.

mod analysis;
mod systems;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Taylor2};
use crate::error::{Error, Result};

pub use analysis::{characteristic_determinant, characteristic_polynomial, eval_polynomial};
pub use systems::{
    damping_classify, lorenz_energy, lorenz_energy_bound, lorenz_energy_rate_bound, lorenz_rhs,
    lotka_volterra_rhs, mass_spring_analytic, mass_spring_reduction, mass_spring_residual,
    rlc_free_response, rlc_residual, DampingClass, DampingKind, Forcing, RlcParams, MASS_SPRING_A,
};

/// Preset names accepted by [`OdeProblem::preset`].
pub const PRESETS: [&str; 4] = ["lorenz", "lotka-volterra", "mass-spring", "rlc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum System {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    LotkaVolterra { alpha: f64, beta: f64, gamma: f64, delta: f64 },
    /// `m1·x″ + (k1 + k2)·x − k2·y = 0`, `m2·y″ + k2·(y − x) = 0`.
    MassSpring { m1: f64, m2: f64, k1: f64, k2: f64 },
    Rlc(RlcParams),
}

/// One initial condition: `d^order u_component / dt^order (t0) = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcCondition {
    pub component: usize,
    pub order: usize,
    pub value: f64,
}

/// An initial-value problem on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeProblem {
    pub name: String,
    pub system: System,
    pub t_start: f64,
    pub t_end: f64,
    /// Initial values of each component.
    pub u0: Vec<f64>,
    /// Initial rates, second-order systems only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v0: Vec<f64>,
}

impl OdeProblem {
    pub fn preset(name: &str) -> Result<Self> {
        let p = match name {
            "lorenz" => OdeProblem {
                name: name.into(),
                system: System::Lorenz { sigma: 10.0, rho: 15.0, beta: 8.0 / 3.0 },
                t_start: 0.0,
                t_end: 3.0,
                u0: vec![-8.0, 7.0, 27.0],
                v0: vec![],
            },
            "lotka-volterra" => OdeProblem {
                name: name.into(),
                // 10x(1.5 − 9.5y), 10y(5.7x − 1.05)
                system: System::LotkaVolterra { alpha: 15.0, beta: 95.0, gamma: 10.5, delta: 57.0 },
                t_start: 0.0,
                t_end: 1.0,
                u0: vec![0.5, 0.075],
                v0: vec![],
            },
            "mass-spring" => OdeProblem {
                name: name.into(),
                // reduces to x″ + 3x − y = 0, y″ + 2y − 2x = 0
                system: System::MassSpring { m1: 2.0, m2: 1.0, k1: 4.0, k2: 2.0 },
                t_start: 0.0,
                t_end: 2.0 * PI,
                u0: vec![3.0, 3.0],
                v0: vec![0.0, 0.0],
            },
            "rlc" => OdeProblem {
                name: name.into(),
                system: System::Rlc(RlcParams { r: 20000.0, l: 8.0, c: 0.125e-6, forcing: Forcing::Zero }),
                t_start: 0.0,
                t_end: 0.05,
                u0: vec![1.0],
                v0: vec![0.0],
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown problem preset '{other}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        match self.system {
            System::Lorenz { .. } => 3,
            System::LotkaVolterra { .. } | System::MassSpring { .. } => 2,
            System::Rlc(_) => 1,
        }
    }

    /// Highest time derivative in the residual.
    pub fn order(&self) -> usize {
        match self.system {
            System::Lorenz { .. } | System::LotkaVolterra { .. } => 1,
            System::MassSpring { .. } | System::Rlc(_) => 2,
        }
    }

    pub fn component_names(&self) -> Vec<&'static str> {
        match self.system {
            System::Lorenz { .. } => vec!["x", "y", "z"],
            System::LotkaVolterra { .. } | System::MassSpring { .. } => vec!["x", "y"],
            System::Rlc(_) => vec!["v"],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "time domain [{}, {}] is empty or reversed",
                self.t_start, self.t_end
            )));
        }
        if self.u0.len() != self.dim() {
            return Err(Error::Config(format!("{} needs {} initial values", self.name, self.dim())));
        }
        let want_v = if self.order() == 2 { self.dim() } else { 0 };
        if self.v0.len() != want_v {
            return Err(Error::Config(format!("{} needs {want_v} initial rates", self.name)));
        }
        match &self.system {
            System::Rlc(p) => p.validate()?,
            System::MassSpring { m1, m2, k1, k2 } if ![*m1, *m2, *k1, *k2].iter().all(|v| *v > 0.0 && v.is_finite()) => {
                return Err(Error::Config("mass-spring masses and stiffnesses must be positive".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Named scalar parameters, including domain and initial conditions.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match &self.system {
            System::Lorenz { sigma, rho, beta } => {
                m.insert("sigma".into(), *sigma);
                m.insert("rho".into(), *rho);
                m.insert("beta".into(), *beta);
            }
            System::LotkaVolterra { alpha, beta, gamma, delta } => {
                m.insert("alpha".into(), *alpha);
                m.insert("beta".into(), *beta);
                m.insert("gamma".into(), *gamma);
                m.insert("delta".into(), *delta);
            }
            System::MassSpring { m1, m2, k1, k2 } => {
                m.insert("m1".into(), *m1);
                m.insert("m2".into(), *m2);
                m.insert("k1".into(), *k1);
                m.insert("k2".into(), *k2);
            }
            System::Rlc(p) => {
                m.insert("R".into(), p.r);
                m.insert("L".into(), p.l);
                m.insert("C".into(), p.c);
            }
        }
        m.insert("t_start".into(), self.t_start);
        m.insert("t_end".into(), self.t_end);
        for (j, name) in self.component_names().iter().enumerate() {
            m.insert(format!("{name}0"), self.u0[j]);
            if let Some(v) = self.v0.get(j) {
                m.insert(format!("d{name}0"), *v);
            }
        }
        m
    }

    /// Override one named parameter (see [`params`](Self::params)).
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        let unknown = || Error::Config(format!("problem '{}' has no parameter '{key}'", self.name));
        match key {
            "t_start" => self.t_start = value,
            "t_end" => self.t_end = value,
            _ => {
                let names = self.component_names();
                if let Some(j) = names.iter().position(|n| format!("{n}0") == key) {
                    self.u0[j] = value;
                } else if let Some(j) = names.iter().position(|n| format!("d{n}0") == key) {
                    if self.v0.is_empty() {
                        return Err(unknown());
                    }
                    self.v0[j] = value;
                } else {
                    let slot = match (&mut self.system, key) {
                        (System::Lorenz { sigma, .. }, "sigma" | "delta") => sigma,
                        (System::Lorenz { rho, .. }, "rho") => rho,
                        (System::Lorenz { beta, .. }, "beta") => beta,
                        (System::LotkaVolterra { alpha, .. }, "alpha") => alpha,
                        (System::LotkaVolterra { beta, .. }, "beta") => beta,
                        (System::LotkaVolterra { gamma, .. }, "gamma") => gamma,
                        (System::LotkaVolterra { delta, .. }, "delta") => delta,
                        (System::MassSpring { m1, .. }, "m1") => m1,
                        (System::MassSpring { m2, .. }, "m2") => m2,
                        (System::MassSpring { k1, .. }, "k1") => k1,
                        (System::MassSpring { k2, .. }, "k2") => k2,
                        (System::Rlc(p), "R" | "r") => &mut p.r,
                        (System::Rlc(p), "L" | "l") => &mut p.l,
                        (System::Rlc(p), "C" | "c") => &mut p.c,
                        _ => return Err(unknown()),
                    };
                    *slot = value;
                }
            }
        }
        Ok(())
    }

    /// Initial conditions in a fixed order: values, then rates.
    pub fn ic_conditions(&self) -> Vec<IcCondition> {
        let mut out: Vec<IcCondition> = self
            .u0
            .iter()
            .enumerate()
            .map(|(component, &value)| IcCondition { component, order: 0, value })
            .collect();
        out.extend(
            self.v0.iter().enumerate().map(|(component, &value)| IcCondition { component, order: 1, value }),
        );
        out
    }

    /// ODE residuals at `t` for the network series `u` (one per equation).
    pub fn residual<S: Real>(&self, t: f64, u: &[Taylor2<S>]) -> Vec<S> {
        match &self.system {
            System::Lorenz { sigma, rho, beta } => {
                let f = lorenz_rhs([u[0].value, u[1].value, u[2].value], *sigma, *rho, *beta);
                vec![u[0].d1 - f[0], u[1].d1 - f[1], u[2].d1 - f[2]]
            }
            System::LotkaVolterra { alpha, beta, gamma, delta } => {
                let f = lotka_volterra_rhs([u[0].value, u[1].value], *alpha, *beta, *gamma, *delta);
                vec![u[0].d1 - f[0], u[1].d1 - f[1]]
            }
            System::MassSpring { .. } => {
                let [a, b, c] = self.stiffness();
                let (x, y) = (u[0].value, u[1].value);
                vec![u[0].d2 + x.scale(a) - y.scale(b), u[1].d2 + (y - x).scale(c)]
            }
            System::Rlc(p) => vec![systems::rlc_residual_unchecked(t, u[0].value, u[0].d1, u[0].d2, p)],
        }
    }

    /// Length of the first-order state: `dim` or `2·dim`.
    pub fn state_dim(&self) -> usize {
        self.dim() * self.order()
    }

    /// Initial first-order state: values followed by rates.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut s = self.u0.clone();
        s.extend_from_slice(&self.v0);
        s
    }

    /// First-order right-hand side on the state `(u, u′)` for integrators.
    pub fn rhs(&self, t: f64, state: &[f64], out: &mut [f64]) {
        match &self.system {
            System::Lorenz { sigma, rho, beta } => {
                out.copy_from_slice(&lorenz_rhs([state[0], state[1], state[2]], *sigma, *rho, *beta));
            }
            System::LotkaVolterra { alpha, beta, gamma, delta } => {
                out.copy_from_slice(&lotka_volterra_rhs([state[0], state[1]], *alpha, *beta, *gamma, *delta));
            }
            System::MassSpring { .. } => {
                let [a, b, c] = self.stiffness();
                let (x, y) = (state[0], state[1]);
                out[0] = state[2];
                out[1] = state[3];
                out[2] = b * y - a * x;
                out[3] = c * (x - y);
            }
            System::Rlc(p) => {
                let (v, dv) = (state[0], state[1]);
                out[0] = dv;
                out[1] = (p.forcing.at(t) - dv / p.r - v / p.l) / p.c;
            }
        }
    }

    /// Mass-normalised coefficients `[(k1 + k2)/m1, k2/m1, k2/m2]`.
    fn stiffness(&self) -> [f64; 3] {
        match self.system {
            System::MassSpring { m1, m2, k1, k2 } => [(k1 + k2) / m1, k2 / m1, k2 / m2],
            _ => unreachable!("stiffness is only defined for the mass-spring system"),
        }
    }

    pub fn has_analytic(&self) -> bool {
        match &self.system {
            System::MassSpring { .. } => true,
            System::Rlc(p) => p.forcing == Forcing::Zero,
            _ => false,
        }
    }

    /// Closed-form solution (component values) where one exists.
    pub fn analytic(&self, t: f64) -> Option<Vec<f64>> {
        let tau = t - self.t_start;
        match &self.system {
            System::MassSpring { .. } => {
                // u″ = −K·u with K = [[a, −b], [−c, c]]; expand in the two normal modes
                let [a, b, c] = self.stiffness();
                let half_tr = 0.5 * (a + c);
                let root = (0.25 * (a - c) * (a - c) + b * c).sqrt();
                let modes = [half_tr - root, half_tr + root].map(|lambda| (lambda.sqrt(), [b, a - lambda]));
                let det = modes[0].1[0] * modes[1].1[1] - modes[1].1[0] * modes[0].1[1];
                let solve = |r: [f64; 2]| {
                    [
                        (r[0] * modes[1].1[1] - modes[1].1[0] * r[1]) / det,
                        (modes[0].1[0] * r[1] - r[0] * modes[0].1[1]) / det,
                    ]
                };
                let amp = solve([self.u0[0], self.u0[1]]);
                let rate = solve([self.v0[0], self.v0[1]]);
                let mut out = vec![0.0; 2];
                for (k, (omega, shape)) in modes.iter().enumerate() {
                    let q = amp[k] * (omega * tau).cos() + rate[k] / omega * (omega * tau).sin();
                    out[0] += shape[0] * q;
                    out[1] += shape[1] * q;
                }
                Some(out)
            }
            System::Rlc(p) if p.forcing == Forcing::Zero => Some(vec![rlc_free_response(p, self.u0[0], self.v0[0], tau)]),
            _ => None,
        }
    }
}
