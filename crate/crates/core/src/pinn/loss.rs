use super::{CollocationSet, LossBreakdown, LossWeights, PinnObjective};
use crate::autodiff::{Real, Tape, Taylor2};
use crate::error::{Error, Result};
use crate::integrate::ObservationSet;
use crate::network::{forward, forward_generic, NetworkSpec};
use crate::objective::Objective;
use crate::problems::{IcCondition, OdeProblem};

/// `Σ_j w_j·r_j²` at one collocation point, for transformed outputs `u`.
pub(crate) fn ode_point<S: Real>(problem: &OdeProblem, w: &LossWeights, t: f64, u: &[Taylor2<S>]) -> S {
    let r = problem.residual(t, u);
    let mut acc = r[0].square().scale(w.ode_component(0));
    for (j, rj) in r.iter().enumerate().skip(1) {
        acc = acc + rj.square().scale(w.ode_component(j));
    }
    acc
}

/// `Σ_j w_j·(obs_j − û_j)²` at one observation time.
pub(crate) fn data_point<S: Real>(w: &LossWeights, obs: &[f64], u: &[Taylor2<S>]) -> S {
    let mut acc = (u[0].value.offset(-obs[0])).square().scale(w.data_component(0));
    for j in 1..obs.len() {
        acc = acc + (u[j].value.offset(-obs[j])).square().scale(w.data_component(j));
    }
    acc
}

/// `Σ_k w_k·(target_k − û^{(order_k)}(t0))²`, before the `1/s` factor.
pub(crate) fn ic_point<S: Real>(w: &LossWeights, conds: &[IcCondition], u: &[Taylor2<S>]) -> S {
    let term = |k: usize, c: &IcCondition| {
        let s = u[c.component];
        let pred = match c.order {
            0 => s.value,
            1 => s.d1,
            _ => s.d2,
        };
        pred.offset(-c.value).square().scale(w.ic_component(k))
    };
    let mut acc = term(0, &conds[0]);
    for (k, c) in conds.iter().enumerate().skip(1) {
        acc = acc + term(k, c);
    }
    acc
}

fn network_at(spec: &NetworkSpec, theta: &[f64], t: f64) -> Result<Vec<Taylor2>> {
    let u = forward(spec, theta, Taylor2::seed(t))?;
    if u.iter().any(|s| !(s.value.is_finite() && s.d1.is_finite() && s.d2.is_finite())) {
        return Err(Error::Numerical(format!("non-finite network output at t = {t}")));
    }
    Ok(u)
}

fn check_shapes(problem: &OdeProblem, spec: &NetworkSpec, weights: &LossWeights) -> Result<()> {
    problem.validate()?;
    spec.validate()?;
    weights.validate(problem)?;
    if spec.output_dim != problem.dim() {
        return Err(Error::Config(format!(
            "network has {} outputs but {} has {} components",
            spec.output_dim,
            problem.name,
            problem.dim()
        )));
    }
    Ok(())
}

/// Mean over collocation points of the per-component weighted squared residual
/// (the global ODE weight is not applied).
pub fn ode_residual_loss(
    problem: &OdeProblem,
    spec: &NetworkSpec,
    theta: &[f64],
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<f64> {
    check_shapes(problem, spec, weights)?;
    if colloc.is_empty() {
        return Err(Error::Config("collocation set is empty".into()));
    }
    let mut sum = 0.0;
    for &t in &colloc.points {
        let u = network_at(spec, theta, t)?;
        sum += ode_point(problem, weights, t, &u);
    }
    Ok(sum / colloc.len() as f64)
}

pub(crate) fn check_observations(problem: &OdeProblem, obs: &ObservationSet) -> Result<()> {
    obs.validate()?;
    if let Some(t) = obs.times.iter().find(|t| **t < problem.t_start || **t > problem.t_end) {
        return Err(Error::Config(format!(
            "observation time {t} lies outside the domain [{}, {}]",
            problem.t_start, problem.t_end
        )));
    }
    if !obs.is_empty() && obs.components() != problem.dim() {
        return Err(Error::Config(format!(
            "observations have {} components, {} has {}",
            obs.components(),
            problem.name,
            problem.dim()
        )));
    }
    Ok(())
}

/// Mean squared data misfit with per-component weights; 0 for no observations.
pub fn data_loss(
    problem: &OdeProblem,
    spec: &NetworkSpec,
    theta: &[f64],
    observations: &ObservationSet,
    weights: &LossWeights,
) -> Result<f64> {
    check_shapes(problem, spec, weights)?;
    check_observations(problem, observations)?;
    if observations.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (t, row) in observations.times.iter().zip(&observations.values) {
        let u = network_at(spec, theta, *t)?;
        sum += data_point(weights, row, &u);
    }
    Ok(sum / observations.len() as f64)
}

/// Initial-condition misfit, each squared term divided by the number of
/// conditions `s`.
pub fn ic_loss(problem: &OdeProblem, spec: &NetworkSpec, theta: &[f64], weights: &LossWeights) -> Result<f64> {
    check_shapes(problem, spec, weights)?;
    let conds = problem.ic_conditions();
    let u = network_at(spec, theta, problem.t_start)?;
    Ok(ic_point(weights, &conds, &u) / conds.len() as f64)
}

/// Loss terms and the gradient of the weighted total, batched.
pub fn total_loss(
    problem: &OdeProblem,
    spec: &NetworkSpec,
    theta: &[f64],
    colloc: &CollocationSet,
    observations: Option<&ObservationSet>,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut obj = PinnObjective::new(problem, spec, colloc, observations, weights)?;
    let mut grad = vec![0.0; theta.len()];
    obj.value_and_grad(theta, &mut grad)?;
    Ok((obj.last_breakdown(), grad))
}

/// Same as [`total_loss`], but records the whole computation (every network
/// parameter included) on one tape. Slow; meant for cross-checking.
pub fn total_loss_reference(
    problem: &OdeProblem,
    spec: &NetworkSpec,
    theta: &[f64],
    colloc: &CollocationSet,
    observations: Option<&ObservationSet>,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    check_shapes(problem, spec, weights)?;
    spec.check_params(theta)?;
    if let Some(obs) = observations {
        check_observations(problem, obs)?;
    }
    let tape = Tape::new();
    let params = tape.params(theta);
    let at = |t: f64| forward_generic(spec, &params, Taylor2::seed(t));

    let inv_n = 1.0 / colloc.len() as f64;
    let mut ode = tape.constant(0.0);
    for &t in &colloc.points {
        ode = ode + ode_point(problem, weights, t, &at(t)).scale(inv_n);
    }
    let mut data = tape.constant(0.0);
    if let Some(obs) = observations.filter(|o| !o.is_empty()) {
        let inv = 1.0 / obs.len() as f64;
        for (t, row) in obs.times.iter().zip(&obs.values) {
            data = data + data_point(weights, row, &at(*t)).scale(inv);
        }
    }
    let conds = problem.ic_conditions();
    let ic = ic_point(weights, &conds, &at(problem.t_start)).scale(1.0 / conds.len() as f64);
    let total = data.scale(weights.data) + ode.scale(weights.ode) + ic.scale(weights.ic);
    if !total.value().is_finite() {
        return Err(Error::Numerical("non-finite loss".into()));
    }
    let mut grad = tape.backward(total.id())?;
    grad.resize(theta.len(), 0.0);
    Ok((LossBreakdown { data: data.value(), ode: ode.value(), ic: ic.value(), total: total.value() }, grad))
}
