use super::loss::{check_observations, data_point, ic_point, ode_point};
use super::{CollocationSet, LossBreakdown, LossWeights};
use crate::autodiff::{Real, Tape, Taylor2, Var};
use crate::error::{Error, Result};
use crate::integrate::ObservationSet;
use crate::network::{apply_transform, BatchNet, Comps, NetworkSpec, OutputTransform};
use crate::objective::Objective;
use crate::problems::{IcCondition, OdeProblem};

/// One group of points evaluated together, with its loss head.
struct Block {
    net: BatchNet,
    /// `∂L/∂(raw outputs)`, laid out like the batch output.
    d_out: Vec<f64>,
}

impl Block {
    fn new(spec: &NetworkSpec, times: &[f64], comps: Comps) -> Self {
        let net = BatchNet::new(spec, times, comps);
        let d_out = vec![0.0; net.output().len()];
        Block { net, d_out }
    }
}

/// The composite loss as an [`Objective`]: all points of a term go through
/// the network in one batch, and each point's loss is differentiated with
/// respect to the raw outputs on a small tape before the batched reverse
/// sweep through the network.
pub struct PinnObjective {
    problem: OdeProblem,
    spec: NetworkSpec,
    weights: LossWeights,
    colloc: Block,
    data: Option<(Block, Vec<Vec<f64>>)>,
    ic: Block,
    conds: Vec<IcCondition>,
    tape: Tape,
    raw: Vec<f64>,
    raw_grad: Vec<f64>,
    last: LossBreakdown,
    tolerant: bool,
}

impl PinnObjective {
    pub fn new(
        problem: &OdeProblem,
        spec: &NetworkSpec,
        colloc: &CollocationSet,
        observations: Option<&ObservationSet>,
        weights: &LossWeights,
    ) -> Result<Self> {
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
        if colloc.is_empty() {
            return Err(Error::Config("collocation set is empty".into()));
        }
        let data = match observations {
            Some(obs) if !obs.is_empty() => {
                check_observations(problem, obs)?;
                Some((Block::new(spec, &obs.times, Comps::Value), obs.values.clone()))
            }
            Some(obs) => {
                check_observations(problem, obs)?;
                None
            }
            None => None,
        };
        let conds = problem.ic_conditions();
        let ic_order = conds.iter().map(|c| c.order).max().unwrap_or(0);
        Ok(PinnObjective {
            colloc: Block::new(spec, &colloc.points, Comps::for_order(problem.order())),
            ic: Block::new(spec, &[problem.t_start], Comps::for_order(ic_order)),
            data,
            conds,
            problem: problem.clone(),
            spec: spec.clone(),
            weights: weights.clone(),
            tape: Tape::new(),
            raw: vec![0.0; 3 * problem.dim()],
            raw_grad: vec![0.0; 3 * problem.dim()],
            last: LossBreakdown::default(),
            tolerant: false,
        })
    }

    /// Loss terms at the most recently evaluated parameters.
    pub fn last_breakdown(&self) -> LossBreakdown {
        self.last
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn problem(&self) -> &OdeProblem {
        &self.problem
    }

    /// When set, non-finite network outputs yield an infinite loss and zero
    /// gradient instead of an error, so optimizers can back off.
    pub fn set_tolerant(&mut self, tolerant: bool) {
        self.tolerant = tolerant;
    }

    pub fn evaluate(&mut self, theta: &[f64]) -> Result<LossBreakdown> {
        self.run(theta, None)
    }

    fn run(&mut self, theta: &[f64], mut grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        self.spec.check_params(theta)?;
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != theta.len() {
                return Err(Error::Contract(format!("gradient buffer has {} entries, θ has {}", g.len(), theta.len())));
            }
            g.fill(0.0);
        }
        match self.terms(theta, grad.is_some()) {
            Ok(b) => {
                self.last = b;
                if let Some(g) = grad {
                    self.backward(theta, g);
                }
                Ok(b)
            }
            Err(Error::Numerical(_)) if self.tolerant => {
                self.last = LossBreakdown { data: f64::NAN, ode: f64::NAN, ic: f64::NAN, total: f64::INFINITY };
                Ok(self.last)
            }
            Err(e) => Err(e),
        }
    }

    /// Forward all blocks, evaluate the heads and fill each block's `d_out`.
    fn terms(&mut self, theta: &[f64], want_grad: bool) -> Result<LossBreakdown> {
        let PinnObjective { problem, spec, weights, colloc, data, ic, conds, tape, raw, raw_grad, .. } = self;
        let d = problem.dim();
        let transform = &spec.output_transform;

        colloc.net.forward(theta);
        let n = colloc.net.len();
        let grad_needed = want_grad && weights.ode != 0.0;
        let mut ode = 0.0;
        for p in 0..n {
            let t = colloc.net.times()[p];
            load_raw(&colloc.net, p, d, raw)?;
            let h = OdeHead { problem, weights, transform, t };
            ode += eval_head(tape, raw, grad_needed.then_some(&mut raw_grad[..]), &h)?;
            if grad_needed {
                scatter(&colloc.net, p, d, raw_grad, weights.ode / n as f64, &mut colloc.d_out);
            }
        }
        let ode = ode / n as f64;

        let mut data_term = 0.0;
        if let Some((block, values)) = data.as_mut() {
            block.net.forward(theta);
            let m = block.net.len();
            let grad_needed = want_grad && weights.data != 0.0;
            for p in 0..m {
                load_raw(&block.net, p, d, raw)?;
                let h = DataHead { weights, transform, t: block.net.times()[p], obs: &values[p] };
                data_term += eval_head(tape, raw, grad_needed.then_some(&mut raw_grad[..]), &h)?;
                if grad_needed {
                    scatter(&block.net, p, d, raw_grad, weights.data / m as f64, &mut block.d_out);
                }
            }
            data_term /= m as f64;
        }

        ic.net.forward(theta);
        let s = conds.len() as f64;
        load_raw(&ic.net, 0, d, raw)?;
        let grad_needed = want_grad && weights.ic != 0.0;
        let h = IcHead { weights, transform, t0: problem.t_start, conds };
        let ic_term = eval_head(tape, raw, grad_needed.then_some(&mut raw_grad[..]), &h)? / s;
        if grad_needed {
            scatter(&ic.net, 0, d, raw_grad, weights.ic / s, &mut ic.d_out);
        }

        let b = LossBreakdown::combine(weights, data_term, ode, ic_term);
        if !b.total.is_finite() {
            return Err(Error::Numerical("non-finite total loss".into()));
        }
        Ok(b)
    }

    fn backward(&mut self, theta: &[f64], grad: &mut [f64]) {
        if self.weights.ode != 0.0 {
            self.colloc.net.backward(theta, &self.colloc.d_out, grad);
        }
        if self.weights.data != 0.0 {
            if let Some((block, _)) = self.data.as_mut() {
                block.net.backward(theta, &block.d_out, grad);
            }
        }
        if self.weights.ic != 0.0 {
            self.ic.net.backward(theta, &self.ic.d_out, grad);
        }
    }
}

fn load_raw(net: &BatchNet, p: usize, d: usize, raw: &mut [f64]) -> Result<()> {
    for j in 0..d {
        let s = net.raw_series(j, p);
        raw[3 * j] = s.value;
        raw[3 * j + 1] = s.d1;
        raw[3 * j + 2] = s.d2;
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite network output at t = {}", net.times()[p])));
    }
    Ok(())
}

/// Loss contribution of one point as a function of the raw output series.
trait Head {
    fn eval<S: Real>(&self, raw: &[Taylor2<S>]) -> S;
}

struct OdeHead<'a> {
    problem: &'a OdeProblem,
    weights: &'a LossWeights,
    transform: &'a OutputTransform,
    t: f64,
}

impl Head for OdeHead<'_> {
    fn eval<S: Real>(&self, raw: &[Taylor2<S>]) -> S {
        let mut u = raw.to_vec();
        apply_transform(self.transform, Taylor2::seed(self.t), &mut u);
        ode_point(self.problem, self.weights, self.t, &u)
    }
}

struct DataHead<'a> {
    weights: &'a LossWeights,
    transform: &'a OutputTransform,
    t: f64,
    obs: &'a [f64],
}

impl Head for DataHead<'_> {
    fn eval<S: Real>(&self, raw: &[Taylor2<S>]) -> S {
        let mut u = raw.to_vec();
        apply_transform(self.transform, Taylor2::seed(self.t), &mut u);
        data_point(self.weights, self.obs, &u)
    }
}

struct IcHead<'a> {
    weights: &'a LossWeights,
    transform: &'a OutputTransform,
    t0: f64,
    conds: &'a [IcCondition],
}

impl Head for IcHead<'_> {
    fn eval<S: Real>(&self, raw: &[Taylor2<S>]) -> S {
        let mut u = raw.to_vec();
        apply_transform(self.transform, Taylor2::seed(self.t0), &mut u);
        ic_point(self.weights, self.conds, &u)
    }
}

/// Value of `head` at the flattened raw series; with `grad`, also its
/// gradient with respect to every raw entry.
fn eval_head<H: Head>(tape: &mut Tape, raw: &[f64], grad: Option<&mut [f64]>, head: &H) -> Result<f64> {
    let series = |c: &[f64]| Taylor2 { value: c[0], d1: c[1], d2: c[2] };
    let Some(grad) = grad else {
        let u: Vec<Taylor2> = raw.chunks(3).map(series).collect();
        return Ok(head.eval(&u));
    };
    tape.clear();
    let leaves = tape.params(raw);
    let u: Vec<Taylor2<Var<'_>>> =
        leaves.chunks(3).map(|c| Taylor2 { value: c[0], d1: c[1], d2: c[2] }).collect();
    let out = head.eval(&u);
    let g = tape.backward(out.id())?;
    grad.fill(0.0);
    grad[..g.len()].copy_from_slice(&g);
    Ok(out.value())
}

fn scatter(net: &BatchNet, p: usize, d: usize, g: &[f64], scale: f64, d_out: &mut [f64]) {
    let (c, n) = (net.comps(), net.len());
    for j in 0..d {
        for k in 0..c {
            d_out[j * c * n + k * n + p] = scale * g.get(3 * j + k).copied().unwrap_or(0.0);
        }
    }
}

impl Objective for PinnObjective {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(self.run(theta, None)?.total)
    }

    fn value_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self.run(theta, Some(grad))?.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{reference_solution, Rk45Options};
    use crate::network::{init_params, Activation, ComponentTransform, FeatureMap};
    use crate::pinn::total_loss_reference;

    fn observations(p: &OdeProblem, n: usize) -> ObservationSet {
        let times: Vec<f64> =
            (0..n).map(|i| p.t_start + (p.t_end - p.t_start) * (i as f64 + 0.5) / n as f64).collect();
        let r = reference_solution(p, &times, &Rk45Options::default()).unwrap();
        ObservationSet { times, values: r.states, sigma: 0.0 }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn specs(p: &OdeProblem) -> Vec<NetworkSpec> {
        let d = p.dim();
        let hard: Vec<ComponentTransform> = (0..d)
            .map(|j| ComponentTransform::HardIc { t0: p.t_start, u0: p.u0[j], v0: p.v0.get(j).copied() })
            .collect();
        vec![
            NetworkSpec::new(2, 6, Activation::Tanh, d),
            NetworkSpec::new(3, 5, Activation::Sine, d).with_features(FeatureMap::sinusoidal(4)),
            NetworkSpec::new(2, 4, Activation::Swish, d).with_transform(OutputTransform(hard)),
            NetworkSpec::new(1, 5, Activation::Sigmoid, d)
                .with_transform(OutputTransform(vec![ComponentTransform::Positivity; d])),
        ]
    }

    fn weights_for(p: &OdeProblem) -> LossWeights {
        let mut w = LossWeights { data: 0.7, ode: 1.3, ic: 2.1, ..LossWeights::unit() };
        w.ode_components = (0..p.dim()).map(|j| 1.0 + 0.5 * j as f64).collect();
        w.data_components = (0..p.dim()).map(|j| 2.0 - 0.25 * j as f64).collect();
        w.ic_components = (0..p.ic_conditions().len()).map(|k| 0.5 + k as f64).collect();
        w
    }

    #[test]
    fn batched_gradient_matches_full_tape() {
        for name in crate::problems::PRESETS {
            let p = OdeProblem::preset(name).unwrap();
            let colloc = CollocationSet::grid(p.t_start, p.t_end, 7).unwrap();
            let obs = observations(&p, 5);
            let w = weights_for(&p);
            for (i, spec) in specs(&p).iter().enumerate() {
                let theta = init_params(spec, 11 + i as u64).0;
                let mut obj = PinnObjective::new(&p, spec, &colloc, Some(&obs), &w).unwrap();
                let mut g = vec![0.0; theta.len()];
                let f = obj.value_and_grad(&theta, &mut g).unwrap();
                let (b, g_ref) = total_loss_reference(&p, spec, &theta, &colloc, Some(&obs), &w).unwrap();
                assert!(close(f, b.total, 1e-12), "{name}/{i}: {f} vs {}", b.total);
                let b2 = obj.last_breakdown();
                assert!(close(b2.ode, b.ode, 1e-12) && close(b2.data, b.data, 1e-12) && close(b2.ic, b.ic, 1e-12));
                let scale = g_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (k, (x, y)) in g.iter().zip(&g_ref).enumerate() {
                    assert!((x - y).abs() <= 1e-10 * (1.0 + scale), "{name}/{i} θ[{k}]: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for name in crate::problems::PRESETS {
            let p = OdeProblem::preset(name).unwrap();
            let spec = NetworkSpec::new(2, 10, Activation::Tanh, p.dim());
            let colloc = CollocationSet::grid(p.t_start, p.t_end, 9).unwrap();
            let obs = observations(&p, 4);
            let w = LossWeights::unit();
            let mut obj = PinnObjective::new(&p, &spec, &colloc, Some(&obs), &w).unwrap();
            let mut theta = init_params(&spec, 3).0;
            let mut g = vec![0.0; theta.len()];
            obj.value_and_grad(&theta, &mut g).unwrap();
            for k in (0..theta.len()).step_by(7) {
                let h = 1e-6 * (1.0 + theta[k].abs());
                let x = theta[k];
                theta[k] = x + h;
                let fp = obj.value(&theta).unwrap();
                theta[k] = x - h;
                let fm = obj.value(&theta).unwrap();
                theta[k] = x;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs().max(fd.abs())), "{name} θ[{k}]: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn weights_scale_loss_and_gradient_linearly() {
        let p = OdeProblem::preset("lotka-volterra").unwrap();
        let spec = NetworkSpec::new(2, 8, Activation::Tanh, 2);
        let colloc = CollocationSet::grid(0.0, 1.0, 12).unwrap();
        let obs = observations(&p, 6);
        let theta = init_params(&spec, 5).0;
        let w = weights_for(&p);
        let mut g1 = vec![0.0; theta.len()];
        let mut g2 = g1.clone();
        let f1 = PinnObjective::new(&p, &spec, &colloc, Some(&obs), &w).unwrap().value_and_grad(&theta, &mut g1).unwrap();
        let f2 = PinnObjective::new(&p, &spec, &colloc, Some(&obs), &w.scaled(3.5))
            .unwrap()
            .value_and_grad(&theta, &mut g2)
            .unwrap();
        assert!(close(f2, 3.5 * f1, 1e-13));
        assert!(g1.iter().zip(&g2).all(|(a, b)| close(*b, 3.5 * a, 1e-12)));
    }

    #[test]
    fn zero_ode_weight_drops_residual_gradient() {
        let p = OdeProblem::preset("lorenz").unwrap();
        let spec = NetworkSpec::new(2, 8, Activation::Tanh, 3);
        let colloc = CollocationSet::grid(0.0, 3.0, 10).unwrap();
        let obs = observations(&p, 6);
        let theta = init_params(&spec, 9).0;
        let off = LossWeights { ode: 0.0, ..LossWeights::unit() };
        let mut g_off = vec![0.0; theta.len()];
        PinnObjective::new(&p, &spec, &colloc, Some(&obs), &off).unwrap().value_and_grad(&theta, &mut g_off).unwrap();

        let few = CollocationSet::grid(0.0, 3.0, 2).unwrap();
        let mut g_few = vec![0.0; theta.len()];
        PinnObjective::new(&p, &spec, &few, Some(&obs), &off).unwrap().value_and_grad(&theta, &mut g_few).unwrap();
        assert_eq!(g_off, g_few);

        let (_, g_ref) = total_loss_reference(&p, &spec, &theta, &colloc, Some(&obs), &off).unwrap();
        assert!(g_off.iter().zip(&g_ref).all(|(a, b)| close(*a, *b, 1e-12)));
    }

    #[test]
    fn tolerant_mode_absorbs_overflow() {
        let p = OdeProblem::preset("lorenz").unwrap();
        let spec = NetworkSpec::new(1, 3, Activation::Tanh, 3);
        let colloc = CollocationSet::grid(0.0, 3.0, 4).unwrap();
        let mut theta = init_params(&spec, 0).0;
        let last = theta.len() - 1;
        theta[last] = f64::INFINITY;
        let mut obj = PinnObjective::new(&p, &spec, &colloc, None, &LossWeights::unit()).unwrap();
        assert!(matches!(obj.value(&theta), Err(Error::Numerical(_))));
        obj.set_tolerant(true);
        let mut g = vec![1.0; theta.len()];
        assert_eq!(obj.value_and_grad(&theta, &mut g).unwrap(), f64::INFINITY);
        assert!(g.iter().all(|v| *v == 0.0));
    }
}
