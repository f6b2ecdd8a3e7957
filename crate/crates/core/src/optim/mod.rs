//! Adam, L-BFGS and the Adam-then-L-BFGS schedule.

mod adam;
mod lbfgs;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;

pub use adam::{adam_step, AdamState};
pub use lbfgs::{lbfgs_observed, lbfgs_run, LbfgsOptions, LbfgsReport, LbfgsState, LbfgsStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Adam,
    Lbfgs,
}

/// What an observer sees after each evaluated iterate.
#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub stage: Stage,
    /// Global iteration index across both stages.
    pub iteration: usize,
    pub loss: f64,
    pub theta: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOptions {
    pub adam_iters: usize,
    pub learning_rate: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        TwoStageOptions { adam_iters: 1000, learning_rate: 1e-3, lbfgs: LbfgsOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutcome {
    /// Lowest-loss iterate over both stages.
    pub theta: Vec<f64>,
    pub loss: f64,
    pub adam_iterations: usize,
    pub lbfgs: Option<LbfgsReport>,
    /// The observer asked to stop.
    pub stopped: bool,
}

/// Adam then L-BFGS with no observation.
pub fn two_stage_train<O: Objective + ?Sized>(
    obj: &mut O,
    theta0: &[f64],
    opts: &TwoStageOptions,
) -> Result<TwoStageOutcome> {
    two_stage_observed(obj, theta0, opts, &mut |_: &mut O, _: Progress<'_>| ControlFlow::Continue(()))
}

/// Adam then L-BFGS. Iteration `k < adam_iters` is the loss at the Adam iterate
/// before its `k`-th update; iteration `adam_iters` is the point handed to
/// L-BFGS, whose iterates continue the numbering.
pub fn two_stage_observed<O, F>(
    obj: &mut O,
    theta0: &[f64],
    opts: &TwoStageOptions,
    observer: &mut F,
) -> Result<TwoStageOutcome>
where
    O: Objective + ?Sized,
    F: FnMut(&mut O, Progress<'_>) -> ControlFlow<()>,
{
    let n = theta0.len();
    if n != obj.dim() {
        return Err(Error::Contract(format!("θ has {n} entries, objective expects {}", obj.dim())));
    }
    if !(opts.learning_rate > 0.0) && opts.adam_iters > 0 {
        return Err(Error::Config(format!("learning rate must be positive, got {}", opts.learning_rate)));
    }
    let mut theta = theta0.to_vec();
    let mut grad = vec![0.0; n];
    let mut adam = AdamState::new(n, opts.learning_rate);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut stopped = false;

    for it in 0..opts.adam_iters {
        let f = obj.value_and_grad(&theta, &mut grad)?;
        if f.is_finite() && best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((theta.clone(), f));
        }
        if observer(obj, Progress { stage: Stage::Adam, iteration: it, loss: f, theta: &theta }).is_break() {
            stopped = true;
            break;
        }
        adam.update(&mut theta, &grad).map_err(|e| match e {
            Error::NonFiniteGradient { .. } => Error::NonFiniteGradient { iteration: it },
            other => other,
        })?;
    }
    let adam_iterations = adam.step;

    let mut lbfgs = None;
    if !stopped && opts.lbfgs.max_iters > 0 {
        let report = lbfgs_observed(obj, &theta, &opts.lbfgs, adam_iterations, observer)?;
        stopped = report.status == LbfgsStatus::Stopped;
        if best.as_ref().is_none_or(|b| report.loss < b.1) {
            best = Some((report.theta.clone(), report.loss));
        }
        lbfgs = Some(report);
    } else if !stopped {
        let f = obj.value_and_grad(&theta, &mut grad)?;
        let progress = Progress { stage: Stage::Adam, iteration: adam_iterations, loss: f, theta: &theta };
        stopped = observer(obj, progress).is_break();
        if f.is_finite() && best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((theta.clone(), f));
        }
    }

    let (theta, loss) = best.unwrap_or((theta, f64::NAN));
    Ok(TwoStageOutcome { theta, loss, adam_iterations, lbfgs, stopped })
}
