use serde::{Deserialize, Serialize};

use super::{Dynamics, SolverInfo, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Give up after this many attempted steps.
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options { rtol: 1e-9, atol: 1e-9, max_steps: 1_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights for the quartic interpolant.
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Dormand–Prince 5(4) from `t0`, reporting the state at each of `eval_times`
/// (non-decreasing, all `≥ t0`) through the continuous extension.
pub fn adaptive_rk45_integrate<D: Dynamics + ?Sized>(
    sys: &D,
    t0: f64,
    y0: &[f64],
    eval_times: &[f64],
    opts: &Rk45Options,
) -> Result<Trajectory> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Config(format!("tolerances must be positive (rtol {}, atol {})", opts.rtol, opts.atol)));
    }
    let n = sys.state_dim();
    if y0.len() != n {
        return Err(Error::Contract(format!("initial state has {} entries, system has {n}", y0.len())));
    }
    if let Some(bad) = eval_times.iter().find(|t| !t.is_finite()) {
        return Err(Error::Config(format!("evaluation time {bad} is not finite")));
    }
    if eval_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("evaluation times must be non-decreasing".into()));
    }
    if let Some(&first) = eval_times.first() {
        if first < t0 {
            return Err(Error::Config(format!(
                "backward integration requested: evaluation time {first} precedes start {t0}"
            )));
        }
    }
    let t_final = eval_times.last().copied().unwrap_or(t0);
    let mut info = SolverInfo {
        method: "dopri5".into(),
        rtol: Some(opts.rtol),
        atol: Some(opts.atol),
        ..Default::default()
    };
    let mut out_states = Vec::with_capacity(eval_times.len());
    let mut next = 0;
    while next < eval_times.len() && eval_times[next] == t0 {
        out_states.push(y0.to_vec());
        next += 1;
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut t = t0;
    sys.rhs(t, &y, &mut k[0]);
    let mut h = initial_step(sys, t, &y, &k[0], opts, t_final - t0);
    let mut attempts = 0;

    while next < eval_times.len() {
        attempts += 1;
        if attempts > opts.max_steps {
            return Err(Error::Numerical(format!("step budget of {} exhausted at t = {t}", opts.max_steps)));
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1e-300);
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let h_step = h.min(t_final - t);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h_step * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            sys.rhs(t + C[s] * h_step, &stage, &mut k[s]);
        }
        // stage 7 was evaluated at the fifth-order solution
        y_new.copy_from_slice(&stage);
        let mut norm = 0.0;
        for i in 0..n {
            err[i] = h_step * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            norm += (err[i] / sc).powi(2);
        }
        let norm = (norm / n.max(1) as f64).sqrt();
        if !norm.is_finite() {
            info.rejected_steps += 1;
            h = 0.25 * h_step;
            continue;
        }
        if norm <= 1.0 {
            info.accepted_steps += 1;
            let t_new = if h_step == t_final - t { t_final } else { t + h_step };
            while next < eval_times.len() && eval_times[next] <= t_new {
                let theta = (eval_times[next] - t) / h_step;
                out_states.push(interpolate(&y, &y_new, &k, h_step, theta));
                next += 1;
            }
            t = t_new;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            let grow = if norm == 0.0 { 10.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 10.0) };
            h = h_step * grow;
        } else {
            info.rejected_steps += 1;
            h = h_step * (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    Ok(Trajectory { times: eval_times.to_vec(), states: out_states, info })
}

fn interpolate(y0: &[f64], y1: &[f64], k: &[Vec<f64>], h: f64, theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    (0..y0.len())
        .map(|i| {
            let diff = y1[i] - y0[i];
            let bspl = h * k[0][i] - diff;
            let r4 = diff - h * k[6][i] - bspl;
            let r5 = h * (0..7).map(|s| DENSE[s] * k[s][i]).sum::<f64>();
            y0[i] + theta * (diff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
        })
        .collect()
}

fn initial_step<D: Dynamics + ?Sized>(
    sys: &D,
    t: f64,
    y: &[f64],
    f0: &[f64],
    opts: &Rk45Options,
    span: f64,
) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let n = y.len().max(1) as f64;
    let scale = |v: f64| opts.atol + opts.rtol * v.abs();
    let d0 = (y.iter().map(|v| (v / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y).map(|(f, v)| (f / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(v, f)| v + h0 * f).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.rhs(t + h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(y).map(|((a, b), v)| ((a - b) / scale(*v)).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{uniform_grid, FnDynamics};
    use crate::problems::OdeProblem;
    use std::f64::consts::PI;

    #[test]
    fn mass_spring_long_horizon() {
        let p = OdeProblem::preset("mass-spring").unwrap();
        let grid = uniform_grid(0.0, 4.0 * PI, 1000);
        let tr = adaptive_rk45_integrate(&p, 0.0, &p.initial_state(), &grid, &Rk45Options::default()).unwrap();
        let worst = grid
            .iter()
            .zip(&tr.states)
            .map(|(&t, s)| {
                let a = p.analytic(t).unwrap();
                (s[0] - a[0]).abs().max((s[1] - a[1]).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{worst}");
        assert!(tr.info.accepted_steps > 10);
    }

    #[test]
    fn tolerance_respected_on_decay() {
        let sys = FnDynamics::new(1, |_, y: &[f64], d: &mut [f64]| d[0] = -2.0 * y[0]);
        let grid = uniform_grid(0.0, 5.0, 101);
        for tol in [1e-4, 1e-6, 1e-8] {
            let opts = Rk45Options { rtol: tol, atol: tol, ..Default::default() };
            let tr = adaptive_rk45_integrate(&sys, 0.0, &[1.0], &grid, &opts).unwrap();
            let worst =
                grid.iter().zip(&tr.states).map(|(&t, s)| (s[0] - (-2.0 * t).exp()).abs()).fold(0.0, f64::max);
            assert!(worst <= 100.0 * tol, "tol {tol}: {worst}");
        }
    }

    #[test]
    fn backward_request_is_rejected() {
        let p = OdeProblem::preset("lorenz").unwrap();
        let r = adaptive_rk45_integrate(&p, 1.0, &p.initial_state(), &[0.5], &Rk45Options::default());
        assert!(matches!(r, Err(Error::Config(_))));
        let bad = Rk45Options { rtol: 0.0, ..Default::default() };
        assert!(matches!(adaptive_rk45_integrate(&p, 0.0, &p.initial_state(), &[1.0], &bad), Err(Error::Config(_))));
    }

    #[test]
    fn lorenz_stays_bounded() {
        let p = OdeProblem::preset("lorenz").unwrap();
        let grid = uniform_grid(0.0, 3.0, 1000);
        let tr = adaptive_rk45_integrate(&p, 0.0, &p.initial_state(), &grid, &Rk45Options::default()).unwrap();
        let peak = tr.states.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 60.0, "{peak}");
        assert!(tr.states.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn finite_time_blow_up_underflows() {
        let sys = FnDynamics::new(1, |_, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0]);
        let r = adaptive_rk45_integrate(&sys, 0.0, &[1.0], &[2.0], &Rk45Options::default());
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::Numerical(_))), "{r:?}");
    }

    #[test]
    fn start_time_is_reported_exactly() {
        let p = OdeProblem::preset("lotka-volterra").unwrap();
        let tr = adaptive_rk45_integrate(&p, 0.0, &p.u0, &[0.0, 0.0, 0.5], &Rk45Options::default()).unwrap();
        assert_eq!(tr.states[0], p.u0);
        assert_eq!(tr.states[1], p.u0);
        assert_eq!(tr.states.len(), 3);
    }
}
