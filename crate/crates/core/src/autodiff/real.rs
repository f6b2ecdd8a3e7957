use std::ops::{Add, Mul, Neg, Sub};

/// Scalar arithmetic shared by plain `f64` and tape variables.
///
/// Network evaluation, output transforms and ODE residuals are written once
/// against this trait. Running them on `f64` gives values; running them on
/// [`Var`](super::Var) records a tape that can be swept in reverse.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// Primal value.
    fn value(&self) -> f64;

    /// A constant living in the same context as `self` (same tape, if any).
    fn lift(&self, c: f64) -> Self;

    fn scale(self, c: f64) -> Self;
    fn offset(self, c: f64) -> Self;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

/// Logistic function, written to avoid overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

impl Real for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn offset(self, c: f64) -> Self {
        self + c
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        softplus(self)
    }
}
