//! Right-hand sides and residuals of the benchmark systems.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Lorenz convection model.
pub fn lorenz_rhs<S: Real>([x, y, z]: [S; 3], sigma: f64, rho: f64, beta: f64) -> [S; 3] {
    [(y - x).scale(sigma), x * (-z).offset(rho) - y, x * y - z.scale(beta)]
}

/// `x² + y² + (z − ρ)²`, non-increasing outside a ball for the Lorenz flow.
pub fn lorenz_energy([x, y, z]: [f64; 3], rho: f64) -> f64 {
    x * x + y * y + (z - rho) * (z - rho)
}

/// Constants `(K, C0)` with `dV/dt ≤ K·V + C0` along Lorenz trajectories.
///
/// Expanding `dV/dt` gives `2σxy − 2σx² − 2y² − 2βz² + 2ρβz`. With
/// `2σxy ≤ σ(x² + y²)` and `w = z − ρ`, `−2βz² + 2ρβz = −2βw² − 2ρβw ≤ −βw² + βρ²`,
/// so `dV/dt ≤ −σx² + (σ − 2)y² − βw² + βρ² ≤ K·V + βρ²`.
pub fn lorenz_energy_rate_bound(sigma: f64, rho: f64, beta: f64) -> (f64, f64) {
    let k = (sigma - 2.0).max(-sigma).max(-beta).max(0.0);
    (k, beta * rho * rho)
}

/// Grönwall bound on `V(t)` given `V(t0) = v0`.
pub fn lorenz_energy_bound(v0: f64, elapsed: f64, sigma: f64, rho: f64, beta: f64) -> f64 {
    let (k, c0) = lorenz_energy_rate_bound(sigma, rho, beta);
    if k == 0.0 {
        v0 + c0 * elapsed
    } else {
        (v0 + c0 / k) * (k * elapsed).exp() - c0 / k
    }
}

/// `dx/dt = αx − βxy`, `dy/dt = −γy + δxy`.
pub fn lotka_volterra_rhs<S: Real>([x, y]: [S; 2], alpha: f64, beta: f64, gamma: f64, delta: f64) -> [S; 2] {
    let xy = x * y;
    [x.scale(alpha) - xy.scale(beta), xy.scale(delta) - y.scale(gamma)]
}

/// Preset residual `(x″ + 3x − y, y″ + 2y − 2x)`.
pub fn mass_spring_residual<S: Real>(_t: f64, x: S, xdd: S, y: S, ydd: S) -> (S, S) {
    (xdd + x.scale(3.0) - y, ydd + y.scale(2.0) - x.scale(2.0))
}

/// First-order reduction `u′ = A·u` with `u = (x, x′, y, y′)`.
pub const MASS_SPRING_A: [[f64; 4]; 4] =
    [[0.0, 1.0, 0.0, 0.0], [-3.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [2.0, 0.0, -2.0, 0.0]];

pub fn mass_spring_reduction(u: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, row) in MASS_SPRING_A.iter().enumerate() {
        out[i] = row.iter().zip(&u).map(|(a, b)| a * b).sum();
    }
    out
}

/// `x(t) = 2cos t + cos 2t`, `y(t) = 4cos t − cos 2t`.
pub fn mass_spring_analytic(t: f64) -> (f64, f64) {
    let (c1, c2) = (t.cos(), (2.0 * t).cos());
    (2.0 * c1 + c2, 4.0 * c1 - c2)
}

/// Source term of the RLC equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Forcing {
    Zero,
    Constant { value: f64 },
    Sine { amplitude: f64, omega: f64 },
}

impl Forcing {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Constant { value } => value,
            Forcing::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlcParams {
    pub r: f64,
    pub l: f64,
    pub c: f64,
    pub forcing: Forcing,
}

impl RlcParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0.0 || !self.r.is_finite() {
            return Err(Error::Config("RLC resistance must be non-zero".into()));
        }
        if self.l == 0.0 || !self.l.is_finite() {
            return Err(Error::Config("RLC inductance must be non-zero".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config("RLC capacitance must be positive".into()));
        }
        Ok(())
    }
}

/// `C·v″ + v′/R + v/L − f(t)`.
pub fn rlc_residual<S: Real>(t: f64, v: S, vd: S, vdd: S, p: &RlcParams) -> Result<S> {
    p.validate()?;
    Ok(rlc_residual_unchecked(t, v, vd, vdd, p))
}

#[inline]
pub(crate) fn rlc_residual_unchecked<S: Real>(t: f64, v: S, vd: S, vdd: S, p: &RlcParams) -> S {
    (vdd.scale(p.c) + vd.scale(1.0 / p.r) + v.scale(1.0 / p.l)).offset(-p.forcing.at(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingKind {
    Underdamped,
    Overdamped,
    CriticallyDamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingClass {
    pub kind: DampingKind,
    /// `sqrt(L / 4C)`.
    pub threshold: f64,
}

/// Free-oscillation regime of the parallel RLC circuit.
pub fn damping_classify(r: f64, l: f64, c: f64) -> DampingClass {
    let threshold = (l / (4.0 * c)).sqrt();
    let kind = if (r - threshold).abs() <= 1e-12 * threshold {
        DampingKind::CriticallyDamped
    } else if r > threshold {
        DampingKind::Underdamped
    } else {
        DampingKind::Overdamped
    };
    DampingClass { kind, threshold }
}

/// Closed-form unforced RLC voltage with `v(0) = v0`, `v′(0) = dv0`.
pub fn rlc_free_response(p: &RlcParams, v0: f64, dv0: f64, t: f64) -> f64 {
    let alpha = 1.0 / (2.0 * p.r * p.c);
    let w0sq = 1.0 / (p.l * p.c);
    let disc = alpha * alpha - w0sq;
    let decay = (-alpha * t).exp();
    match damping_classify(p.r, p.l, p.c).kind {
        DampingKind::Underdamped => {
            let wd = (-disc).sqrt();
            decay * (v0 * (wd * t).cos() + (dv0 + alpha * v0) / wd * (wd * t).sin())
        }
        DampingKind::CriticallyDamped => decay * (v0 + (dv0 + alpha * v0) * t),
        DampingKind::Overdamped => {
            let s = disc.sqrt();
            let (r1, r2) = (-alpha + s, -alpha - s);
            let b = (dv0 - r1 * v0) / (r2 - r1);
            let a = v0 - b;
            a * (r1 * t).exp() + b * (r2 * t).exp()
        }
    }
}
