use std::collections::VecDeque;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{Progress, Stage};
use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub history: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
    /// Stop once the gradient max-norm falls to this value.
    pub gtol: f64,
    pub max_iters: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { history: 10, c1: 1e-4, c2: 0.9, max_line_search: 25, gtol: 1e-8, max_iters: 15_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbfgsStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    /// Lowest-loss iterate seen.
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Gradient max-norm at the final iterate.
    pub grad_norm: f64,
    pub status: LbfgsStatus,
}

/// Curvature pairs for the two-loop recursion.
#[derive(Debug, Clone)]
pub struct LbfgsState {
    capacity: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
}

impl LbfgsState {
    pub fn new(capacity: usize) -> Self {
        LbfgsState { capacity, s: VecDeque::new(), y: VecDeque::new(), rho: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    /// Store a pair if it has positive curvature; returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > f64::EPSILON * norm2(&s) * norm2(&y)) || self.capacity == 0 {
            return false;
        }
        if self.s.len() == self.capacity {
            self.s.pop_front();
            self.y.pop_front();
            self.rho.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.rho.push_back(1.0 / sy);
        true
    }

    /// Quasi-Newton search direction `−H·g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = g.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        if let (Some(s), Some(y)) = (self.s.back(), self.y.back()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub(crate) fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// L-BFGS from `theta0` with default observation (none).
pub fn lbfgs_run<O: Objective + ?Sized>(obj: &mut O, theta0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsReport> {
    lbfgs_observed(obj, theta0, opts, 0, &mut |_: &mut O, _: Progress<'_>| ControlFlow::Continue(()))
}

/// Trial point along the search line.
struct Trial {
    alpha: f64,
    f: f64,
    dphi: f64,
}

struct LineSearch<'a, O: ?Sized> {
    obj: &'a mut O,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evals: usize,
    last_alpha: f64,
    xt: Vec<f64>,
    gt: Vec<f64>,
    /// Lowest sufficient-decrease point seen, with its gradient.
    fallback: Option<(f64, f64, Vec<f64>)>,
}

impl<O: Objective + ?Sized> LineSearch<'_, O> {
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        self.evals += 1;
        self.last_alpha = alpha;
        for ((xt, x), d) in self.xt.iter_mut().zip(self.x).zip(self.d) {
            *xt = x + alpha * d;
        }
        let f = self.obj.value_and_grad(&self.xt, &mut self.gt)?;
        let dphi = dot(&self.gt, self.d);
        let f = if f.is_finite() && dphi.is_finite() { f } else { f64::INFINITY };
        if f <= self.f0 + self.c1 * alpha * self.dphi0 && self.fallback.as_ref().is_none_or(|b| f < b.1) {
            self.fallback = Some((alpha, f, self.gt.clone()));
        }
        Ok(Trial { alpha, f, dphi })
    }

    fn wolfe(&self, t: &Trial) -> bool {
        t.dphi.abs() <= -self.c2 * self.dphi0
    }

    /// Sufficient decrease, or its slope-based approximation once changes in
    /// `f` are at rounding level.
    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + self.c1 * t.alpha * self.dphi0
            || (t.f <= self.f0 + 1e-12 * self.f0.abs() && t.dphi <= (2.0 * self.c1 - 1.0) * self.dphi0)
    }

    /// Strong-Wolfe step; `Ok(None)` when the budget runs out without one.
    fn search(&mut self, alpha0: f64) -> Result<Option<Trial>> {
        let mut prev = Trial { alpha: 0.0, f: self.f0, dphi: self.dphi0 };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.budget {
            let cur = self.eval(alpha)?;
            if !cur.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.wolfe(&cur) {
                return Ok(Some(cur));
            }
            if cur.dphi >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = 2.0 * cur.alpha;
            prev = cur;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Result<Option<Trial>> {
        while self.evals < self.budget {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            if b - a <= 1e-16 * b.max(1e-300) {
                break;
            }
            let guess = cubic_min(&lo, &hi).filter(|g| *g > a + 0.1 * (b - a) && *g < b - 0.1 * (b - a));
            let alpha = guess.unwrap_or(0.5 * (a + b));
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.wolfe(&cur) {
                    return Ok(Some(cur));
                }
                if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(None)
    }
}

/// Minimiser of the cubic through two points with slopes.
fn cubic_min(p: &Trial, q: &Trial) -> Option<f64> {
    if !p.f.is_finite() || !q.f.is_finite() {
        return None;
    }
    let d1 = p.dphi + q.dphi - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.dphi * q.dphi;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.dphi - p.dphi + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let a = q.alpha - (q.alpha - p.alpha) * (q.dphi + d2 - d1) / denom;
    a.is_finite().then_some(a)
}

/// L-BFGS with a strong-Wolfe line search. `observer` sees the starting point
/// (as iteration `first_iteration`) and every accepted iterate after it, each
/// right after the objective was evaluated there.
pub fn lbfgs_observed<O, F>(
    obj: &mut O,
    theta0: &[f64],
    opts: &LbfgsOptions,
    first_iteration: usize,
    observer: &mut F,
) -> Result<LbfgsReport>
where
    O: Objective + ?Sized,
    F: FnMut(&mut O, Progress<'_>) -> ControlFlow<()>,
{
    let n = theta0.len();
    if n != obj.dim() {
        return Err(Error::Contract(format!("θ has {n} entries, objective expects {}", obj.dim())));
    }
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_and_grad(&x, &mut g)?;
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("L-BFGS started at a point with non-finite loss or gradient".into()));
    }
    let mut best = (x.clone(), f);
    let mut memory = LbfgsState::new(opts.history);
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;

    if observer(obj, Progress { stage: Stage::Lbfgs, iteration: first_iteration, loss: f, theta: &x }).is_break() {
        status = LbfgsStatus::Stopped;
    } else if max_norm(&g) <= opts.gtol {
        status = LbfgsStatus::Converged;
    }
    while status == LbfgsStatus::MaxIterations && iterations < opts.max_iters {
        let mut d = memory.direction(&g);
        if !(dot(&g, &d) < 0.0) {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let alpha0 = if memory.is_empty() { (1.0 / norm2(&g)).min(1.0) } else { 1.0 };
            let mut ls = LineSearch {
                obj: &mut *obj,
                x: &x,
                d: &d,
                f0: f,
                dphi0: dot(&g, &d),
                c1: opts.c1,
                c2: opts.c2,
                budget: opts.max_line_search,
                evals: 0,
                last_alpha: 0.0,
                xt: vec![0.0; n],
                gt: vec![0.0; n],
                fallback: None,
            };
            let found = ls.search(alpha0)?;
            evaluations += ls.evals;
            let last_alpha = ls.last_alpha;
            let (fallback, gt) = (ls.fallback.take(), std::mem::take(&mut ls.gt));
            match (found, fallback) {
                (Some(t), _) => accepted = Some((t.alpha, t.f, gt, true)),
                (None, Some((alpha, fb, gb))) if fb < f => accepted = Some((alpha, fb, gb, last_alpha == alpha)),
                _ => {}
            }
            if accepted.is_some() || attempt == 1 || memory.is_empty() {
                break;
            }
            memory.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let Some((alpha, f_new, g_new, was_last)) = accepted else {
            status = LbfgsStatus::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        axpy(1.0, &s, &mut x);
        if !was_last {
            // keep the objective's cached state in sync with the accepted point
            let mut scratch = vec![0.0; n];
            obj.value_and_grad(&x, &mut scratch)?;
            evaluations += 1;
        }
        memory.push(s, y);
        f = f_new;
        g = g_new;
        iterations += 1;
        if f < best.1 {
            best = (x.clone(), f);
        }
        let progress = Progress { stage: Stage::Lbfgs, iteration: first_iteration + iterations, loss: f, theta: &x };
        if observer(obj, progress).is_break() {
            status = LbfgsStatus::Stopped;
            break;
        }
        if max_norm(&g) <= opts.gtol {
            status = LbfgsStatus::Converged;
        }
    }
    Ok(LbfgsReport { theta: best.0, loss: best.1, iterations, evaluations, grad_norm: max_norm(&g), status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;
    use crate::random::NormalStream;

    fn rosenbrock() -> impl Objective {
        FnObjective::new(2, |x: &[f64], g: &mut [f64]| {
            let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            a * a + 100.0 * b * b
        })
    }

    #[test]
    fn rosenbrock_converges() {
        let opts = LbfgsOptions { max_iters: 200, ..Default::default() };
        let r = lbfgs_run(&mut rosenbrock(), &[-1.2, 1.0], &opts).unwrap();
        assert!(r.loss <= 1e-8, "{r:?}");
        assert!(r.iterations <= 200);
    }

    /// `A = Q·diag(λ)·Qᵀ` with random orthonormal `Q` and `λ` uniform in [1, 10].
    fn random_spd(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = NormalStream::new(seed);
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            for u in &q {
                let p = dot(u, &v);
                axpy(-p, u, &mut v);
            }
            let len = norm2(&v);
            if len > 1e-6 {
                q.push(v.iter().map(|x| x / len).collect());
            }
        }
        let lambda: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * rng.uniform()).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| lambda[k] * q[k][i] * q[k][j]).sum();
            }
        }
        let c = (0..n).map(|_| rng.normal()).collect();
        (a, c)
    }

    #[test]
    fn spd_quadratic_in_thirty_iterations() {
        let n = 10;
        for seed in 0..5 {
            let (a, c) = random_spd(n, seed);
            let mut obj = FnObjective::new(n, move |x: &[f64], g: &mut [f64]| {
                let mut f = 0.0;
                for i in 0..n {
                    let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
                    g[i] = ax - c[i];
                    f += 0.5 * x[i] * ax - c[i] * x[i];
                }
                f
            });
            let opts = LbfgsOptions { max_iters: 30, ..Default::default() };
            let r = lbfgs_run(&mut obj, &vec![0.0; n], &opts).unwrap();
            assert!(r.grad_norm <= 1e-8, "seed {seed}: {:e} after {} ({:?})", r.grad_norm, r.iterations, r.status);
            assert_eq!(r.status, LbfgsStatus::Converged);
            assert!(r.iterations <= 30);
        }
    }

    #[test]
    fn stationary_start() {
        let mut obj = FnObjective::new(2, |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
            x[0] * x[0] + x[1] * x[1]
        });
        let r = lbfgs_run(&mut obj, &[0.0, 0.0], &LbfgsOptions::default()).unwrap();
        assert!(r.iterations <= 1);
        assert_eq!(r.theta, [0.0, 0.0]);
        assert_eq!(r.status, LbfgsStatus::Converged);
    }

    #[test]
    fn empty_history_is_steepest_descent() {
        let s = LbfgsState::new(10);
        let g = [0.3, -2.0, 7.5];
        assert_eq!(s.direction(&g), [-0.3, 2.0, -7.5]);
    }

    #[test]
    fn negative_curvature_pairs_are_skipped() {
        let mut s = LbfgsState::new(2);
        assert!(!s.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(s.push(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert!(s.push(vec![0.0, 1.0], vec![0.0, 4.0]));
        assert!(s.push(vec![1.0, 1.0], vec![1.0, 1.0]));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn line_search_failure_is_a_status() {
        // gradient points the wrong way: no descent is possible along −g
        let mut obj = FnObjective::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = -1.0;
            x[0] * x[0]
        });
        let r = lbfgs_run(&mut obj, &[1.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.status, LbfgsStatus::LineSearchFailed);
        assert_eq!(r.theta, [1.0]);
        assert_eq!(r.loss, 1.0);
    }
}
