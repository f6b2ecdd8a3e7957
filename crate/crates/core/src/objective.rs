use crate::error::Result;

/// A differentiable scalar loss over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Loss value only.
    fn value(&mut self, theta: &[f64]) -> Result<f64>;

    /// Loss value, writing the gradient into `grad`.
    fn value_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Adapts a closure `f(θ, ∇) -> loss` that always fills the gradient.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
    scratch: Vec<f64>,
}

impl<F> FnObjective<F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f, scratch: vec![0.0; dim] }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        Ok((self.f)(theta, &mut self.scratch))
    }

    fn value_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok((self.f)(theta, grad))
    }
}
