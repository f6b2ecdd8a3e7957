use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{l2_relative_error, CollocationSet, CollocationStrategy, L2Error, LossBreakdown, LossWeights, PinnObjective};
use crate::error::{Error, Result};
use crate::integrate::{reference_solution, uniform_grid, ObservationSet, Rk45Options, SolverInfo, Trajectory};
use crate::network::{apply_transform, init_params, BatchNet, Comps, NetworkSpec};
use crate::autodiff::Taylor2;
use crate::optim::{two_stage_observed, LbfgsOptions, LbfgsStatus, Progress, Stage, TwoStageOptions};
use crate::problems::OdeProblem;

/// Everything that controls one training run besides the problem and network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    /// Adam iterations ("epochs").
    pub adam_iters: usize,
    pub learning_rate: f64,
    /// L-BFGS refinement; `max_iters = 0` skips the stage.
    pub lbfgs: LbfgsOptions,
    pub collocation: usize,
    pub collocation_strategy: CollocationStrategy,
    pub weights: LossWeights,
    /// Points of the grid used for L2 errors and the reported trajectory.
    pub eval_points: usize,
    /// Record the L2 error every this many iterations.
    pub l2_every: usize,
    /// Abort once the total loss exceeds this value.
    pub divergence_threshold: f64,
    /// Tolerances for numerical reference solutions.
    pub reference: Rk45Options,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            adam_iters: 10_000,
            learning_rate: 1e-3,
            lbfgs: LbfgsOptions::default(),
            collocation: 400,
            collocation_strategy: CollocationStrategy::UniformGrid,
            weights: LossWeights::unit(),
            eval_points: 1000,
            l2_every: 500,
            divergence_threshold: 1e12,
            reference: Rk45Options::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub stage: Stage,
    pub data: f64,
    pub ode: f64,
    pub ic: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Record {
    pub iteration: usize,
    pub total: f64,
    pub per_component: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub problem: OdeProblem,
    pub network: NetworkSpec,
    pub config: TrainConfig,
    pub seed: u64,
    pub history: Vec<LossRecord>,
    pub l2_history: Vec<L2Record>,
    /// Loss terms at the returned (lowest-loss) parameters.
    pub final_loss: LossBreakdown,
    pub final_l2: L2Error,
    pub diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub adam_iterations: usize,
    pub lbfgs_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lbfgs_status: Option<LbfgsStatus>,
    pub wall_seconds: f64,
    pub eval_times: Vec<f64>,
    pub prediction: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    pub reference_method: String,
    pub parameters: Vec<f64>,
}

impl TrainReport {
    /// Totals of the Adam-stage iterations, in order.
    pub fn adam_losses(&self) -> Vec<f64> {
        self.history.iter().filter(|r| r.stage == Stage::Adam).map(|r| r.total).collect()
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,stage,data,ode,ic,total\n");
        for r in &self.history {
            let stage = match r.stage {
                Stage::Adam => "adam",
                Stage::Lbfgs => "lbfgs",
            };
            let _ = writeln!(out, "{},{stage},{},{},{},{}", r.iteration, r.data, r.ode, r.ic, r.total);
        }
        out
    }

    pub fn l2_csv(&self) -> String {
        let names = self.problem.component_names();
        let mut out = String::from("iteration,total");
        for n in &names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for r in &self.l2_history {
            let _ = write!(out, "{},{}", r.iteration, r.total);
            for e in &r.per_component {
                match e {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Prediction and reference side by side on the evaluation grid.
    pub fn trajectory_csv(&self) -> String {
        let names = self.problem.component_names();
        let mut out = String::from("t");
        for n in &names {
            let _ = write!(out, ",{n}_pred");
        }
        for n in &names {
            let _ = write!(out, ",{n}_ref");
        }
        out.push('\n');
        for (i, t) in self.eval_times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in self.prediction[i].iter().chain(&self.reference[i]) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Network values (after output transforms) at `times`.
pub fn predict(spec: &NetworkSpec, theta: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    spec.check_params(theta)?;
    let mut net = BatchNet::new(spec, times, Comps::Value);
    net.forward(theta);
    let d = spec.output_dim;
    Ok((0..times.len())
        .map(|p| {
            let mut u: Vec<Taylor2> = (0..d).map(|j| net.raw_series(j, p)).collect();
            apply_transform(&spec.output_transform, Taylor2::seed(times[p]), &mut u);
            u.iter().map(|s| s.value).collect()
        })
        .collect())
}

fn as_trajectory(times: &[f64], states: Vec<Vec<f64>>) -> Trajectory {
    Trajectory { times: times.to_vec(), states, info: SolverInfo::default() }
}

/// Fit `spec` to `problem` (and `observations`, if any) with Adam followed by
/// L-BFGS. Divergence is reported in the result, not as an error.
pub fn train(
    problem: &OdeProblem,
    spec: &NetworkSpec,
    observations: Option<&ObservationSet>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    let started = Instant::now();
    problem.validate()?;
    if config.eval_points < 2 {
        return Err(Error::Config("evaluation grid needs at least two points".into()));
    }
    if config.l2_every == 0 {
        return Err(Error::Config("L2 recording interval must be positive".into()));
    }
    let colloc = CollocationSet::new(
        config.collocation_strategy,
        problem.t_start,
        problem.t_end,
        config.collocation,
        config.seed,
    )?;
    let mut obj = PinnObjective::new(problem, spec, &colloc, observations, &config.weights)?;
    obj.set_tolerant(true);

    let eval_times = uniform_grid(problem.t_start, problem.t_end, config.eval_points);
    let reference = reference_solution(problem, &eval_times, &config.reference)?;
    let theta0 = init_params(spec, config.seed).0;

    let mut history = Vec::new();
    let mut l2_history = Vec::new();
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, theta0.clone());
    let mut diverged = false;
    let mut failure = None;
    let mut observe = |o: &mut PinnObjective, p: Progress<'_>| {
        let b = o.last_breakdown();
        history.push(LossRecord { iteration: p.iteration, stage: p.stage, data: b.data, ode: b.ode, ic: b.ic, total: b.total });
        if !b.total.is_finite() || b.total > config.divergence_threshold {
            diverged = true;
            failure = Some(format!("total loss {} at iteration {}", b.total, p.iteration));
            return ControlFlow::Break(());
        }
        if b.total < best.0 {
            best = (b.total, p.theta.to_vec());
        }
        if p.iteration.is_multiple_of(config.l2_every) {
            if let Ok(pred) = predict(o.spec(), p.theta, &eval_times) {
                if let Ok(e) = l2_relative_error(&as_trajectory(&eval_times, pred), &reference) {
                    l2_history.push(L2Record { iteration: p.iteration, total: e.total, per_component: e.per_component });
                }
            }
        }
        ControlFlow::Continue(())
    };

    let opts = TwoStageOptions { adam_iters: config.adam_iters, learning_rate: config.learning_rate, lbfgs: config.lbfgs };
    let outcome = two_stage_observed(&mut obj, &theta0, &opts, &mut observe);
    let (adam_iterations, lbfgs_iterations, lbfgs_status) = match outcome {
        Ok(o) => (o.adam_iterations, o.lbfgs.as_ref().map_or(0, |r| r.iterations), o.lbfgs.map(|r| r.status)),
        Err(e @ (Error::NonFiniteGradient { .. } | Error::Numerical(_))) => {
            diverged = true;
            failure = Some(e.to_string());
            let adam = history.iter().filter(|r| r.stage == Stage::Adam).count();
            (adam, history.len() - adam, None)
        }
        Err(e) => return Err(e),
    };

    let parameters = best.1;
    obj.set_tolerant(false);
    let final_loss = obj.evaluate(&parameters).unwrap_or(LossBreakdown {
        data: f64::NAN,
        ode: f64::NAN,
        ic: f64::NAN,
        total: f64::NAN,
    });
    let prediction = predict(spec, &parameters, &eval_times)?;
    let final_l2 = l2_relative_error(&as_trajectory(&eval_times, prediction.clone()), &reference)?;

    Ok(TrainReport {
        problem: problem.clone(),
        network: spec.clone(),
        config: config.clone(),
        seed: config.seed,
        history,
        l2_history,
        final_loss,
        final_l2,
        diverged,
        failure,
        adam_iterations,
        lbfgs_iterations,
        lbfgs_status,
        wall_seconds: started.elapsed().as_secs_f64(),
        eval_times,
        prediction,
        reference: reference.states,
        reference_method: reference.info.method,
        parameters,
    })
}
