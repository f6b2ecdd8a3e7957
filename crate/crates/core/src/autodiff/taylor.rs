//! Truncated second-order Taylor arithmetic in the scalar input `t`.
//!
//! A [`Taylor2`] carries `(u, du/dt, d²u/dt²)`. Seeding the input as
//! `(t, 1, 0)` and pushing it through any composition of the supported
//! primitives yields exact first and second time-derivatives of the result.
//! The component type is generic so the same propagation can run on plain
//! floats or on tape variables.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::real::{sigmoid, Real};
use crate::error::{Error, Result};

/// Value with its first and second derivative with respect to `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor2<S = f64> {
    pub value: S,
    pub d1: S,
    pub d2: S,
}

impl Taylor2<f64> {
    /// The independent variable: `(t, 1, 0)`.
    pub fn seed(t: f64) -> Self {
        Taylor2 { value: t, d1: 1.0, d2: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Taylor2 { value: c, d1: 0.0, d2: 0.0 }
    }

    /// Move a float series into the context of `like`.
    pub fn lift<S: Real>(self, like: &S) -> Taylor2<S> {
        Taylor2 { value: like.lift(self.value), d1: like.lift(self.d1), d2: like.lift(self.d2) }
    }
}

/// Seed the network input.
pub fn seed_input(t: f64) -> Taylor2 {
    Taylor2::seed(t)
}

impl<S: Real> Taylor2<S> {
    pub fn new(value: S, d1: S, d2: S) -> Self {
        Taylor2 { value, d1, d2 }
    }

    /// Second-order chain rule given `f(v)`, `f'(v)`, `f''(v)`.
    #[inline]
    pub fn compose(self, f: S, df: S, d2f: S) -> Self {
        Taylor2 { value: f, d1: df * self.d1, d2: d2f * self.d1 * self.d1 + df * self.d2 }
    }

    #[inline]
    pub fn apply(self, op: Unary) -> Self {
        let (f, df, d2f) = op.derivs(self.value);
        self.compose(f, df, d2f)
    }

    pub fn scale(self, c: f64) -> Self {
        Taylor2 { value: self.value.scale(c), d1: self.d1.scale(c), d2: self.d2.scale(c) }
    }

    pub fn offset(self, c: f64) -> Self {
        Taylor2 { value: self.value.offset(c), ..self }
    }

    /// `a·x + b`.
    pub fn affine(self, a: f64, b: f64) -> Self {
        self.scale(a).offset(b)
    }

    /// Product with a float series (Leibniz rule).
    pub fn mul_series(self, a: Taylor2<f64>) -> Self {
        Taylor2 {
            value: self.value.scale(a.value),
            d1: self.d1.scale(a.value) + self.value.scale(a.d1),
            d2: self.d2.scale(a.value) + self.d1.scale(2.0 * a.d1) + self.value.scale(a.d2),
        }
    }

    /// Sum with a float series.
    pub fn add_series(self, a: Taylor2<f64>) -> Self {
        Taylor2 { value: self.value.offset(a.value), d1: self.d1.offset(a.d1), d2: self.d2.offset(a.d2) }
    }

    pub fn values(&self) -> Taylor2<f64> {
        Taylor2 { value: self.value.value(), d1: self.d1.value(), d2: self.d2.value() }
    }
}

impl<S: Real> Add for Taylor2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Taylor2 { value: self.value + o.value, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl<S: Real> Sub for Taylor2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Taylor2 { value: self.value - o.value, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl<S: Real> Neg for Taylor2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Taylor2 { value: -self.value, d1: -self.d1, d2: -self.d2 }
    }
}

impl<S: Real> Mul for Taylor2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let two_cross = (self.d1 * o.d1).scale(2.0);
        Taylor2 {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + two_cross + self.value * o.d2,
        }
    }
}

/// Elementwise functions that can be pushed through a [`Taylor2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unary {
    Sigmoid,
    Tanh,
    Sin,
    /// `max(x, 0)`, with derivative 0 at the kink and zero curvature everywhere.
    Relu,
    /// `x·sigmoid(x)`.
    Swish,
    Exp,
    Softplus,
}

impl Unary {
    pub const ALL: [Unary; 7] = [
        Unary::Sigmoid,
        Unary::Tanh,
        Unary::Sin,
        Unary::Relu,
        Unary::Swish,
        Unary::Exp,
        Unary::Softplus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Unary::Sigmoid => "sigmoid",
            Unary::Tanh => "tanh",
            Unary::Sin => "sin",
            Unary::Relu => "relu",
            Unary::Swish => "swish",
            Unary::Exp => "exp",
            Unary::Softplus => "softplus",
        }
    }

    /// `(f, f', f'')` at `v`, built from primitive operations of `S`.
    pub fn derivs<S: Real>(self, v: S) -> (S, S, S) {
        match self {
            Unary::Tanh => {
                let t = v.tanh();
                let d = (t * t).scale(-1.0).offset(1.0);
                (t, d, (t * d).scale(-2.0))
            }
            Unary::Sin => {
                let s = v.sin();
                (s, v.cos(), -s)
            }
            Unary::Sigmoid => {
                let s = v.sigmoid();
                let p = s - s * s;
                (s, p, p * s.scale(-2.0).offset(1.0))
            }
            Unary::Relu => {
                if v.value() > 0.0 {
                    (v, v.lift(1.0), v.lift(0.0))
                } else {
                    (v.lift(0.0), v.lift(0.0), v.lift(0.0))
                }
            }
            Unary::Swish => {
                let s = v.sigmoid();
                let p = s - s * s;
                let f = v * s;
                let df = s + v * p;
                let d2f = p.scale(2.0) + v * p * s.scale(-2.0).offset(1.0);
                (f, df, d2f)
            }
            Unary::Exp => {
                let e = v.exp();
                (e, e, e)
            }
            Unary::Softplus => {
                let s = v.sigmoid();
                (v.softplus(), s, s - s * s)
            }
        }
    }

    /// `[f, f', f'', f''']` at `x`. The third derivative is what the
    /// reverse sweep of a second-order Taylor propagation consumes.
    #[inline]
    pub fn derivs3(self, x: f64) -> [f64; 4] {
        match self {
            Unary::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                [t, d, -2.0 * t * d, d * (4.0 * t * t - 2.0 * d)]
            }
            Unary::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c]
            }
            Unary::Sigmoid => {
                let s = sigmoid(x);
                let p = s * (1.0 - s);
                [s, p, p * (1.0 - 2.0 * s), p * (1.0 - 6.0 * s + 6.0 * s * s)]
            }
            Unary::Relu => {
                if x > 0.0 {
                    [x, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
            Unary::Swish => {
                let s = sigmoid(x);
                let p = s * (1.0 - s);
                let q = 1.0 - 2.0 * s;
                let r = 1.0 - 6.0 * s + 6.0 * s * s;
                [x * s, s + x * p, 2.0 * p + x * p * q, 3.0 * p * q + x * p * r]
            }
            Unary::Exp => {
                let e = x.exp();
                [e, e, e, e]
            }
            Unary::Softplus => {
                let s = sigmoid(x);
                let p = s * (1.0 - s);
                [super::real::softplus(x), s, p, p * (1.0 - 2.0 * s)]
            }
        }
    }
}

impl fmt::Display for Unary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Unary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Unary::Sigmoid),
            "tanh" => Ok(Unary::Tanh),
            "sin" | "sine" => Ok(Unary::Sin),
            "relu" => Ok(Unary::Relu),
            "swish" => Ok(Unary::Swish),
            "exp" => Ok(Unary::Exp),
            "softplus" => Ok(Unary::Softplus),
            other => Err(Error::Config(format!("unsupported primitive '{other}'"))),
        }
    }
}

/// Every operation [`taylor_apply`] understands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Unary(Unary),
    Add,
    Mul,
    /// `scale·x + shift`.
    Affine { scale: f64, shift: f64 },
}

impl Primitive {
    pub fn arity(&self) -> usize {
        match self {
            Primitive::Add | Primitive::Mul => 2,
            _ => 1,
        }
    }
}

impl FromStr for Primitive {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "add" => Ok(Primitive::Add),
            "mul" => Ok(Primitive::Mul),
            "affine" => Ok(Primitive::Affine { scale: 1.0, shift: 0.0 }),
            other => other.parse().map(Primitive::Unary),
        }
    }
}

/// Push Taylor operands through one primitive.
pub fn taylor_apply<S: Real>(prim: Primitive, args: &[Taylor2<S>]) -> Result<Taylor2<S>> {
    if args.len() != prim.arity() {
        return Err(Error::Contract(format!(
            "{prim:?} takes {} operand(s), got {}",
            prim.arity(),
            args.len()
        )));
    }
    Ok(match prim {
        Primitive::Unary(op) => args[0].apply(op),
        Primitive::Add => args[0] + args[1],
        Primitive::Mul => args[0] * args[1],
        Primitive::Affine { scale, shift } => args[0].affine(scale, shift),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn seeding() {
        for t in [0.0, 2.5, -1.0] {
            assert_eq!(seed_input(t), Taylor2 { value: t, d1: 1.0, d2: 0.0 });
        }
        assert_eq!(Taylor2::constant(4.0), Taylor2 { value: 4.0, d1: 0.0, d2: 0.0 });
    }

    #[test]
    fn sin_and_tanh_at_origin() {
        let x = seed_input(0.0);
        let s = taylor_apply(Primitive::Unary(Unary::Sin), &[x]).unwrap();
        assert_eq!((s.value, s.d1, s.d2), (0.0, 1.0, -0.0));
        let t = taylor_apply(Primitive::Unary(Unary::Tanh), &[x]).unwrap();
        assert_eq!((t.value, t.d1, t.d2), (0.0, 1.0, 0.0));
    }

    #[test]
    fn sin_at_half_pi() {
        let s = seed_input(FRAC_PI_2).apply(Unary::Sin);
        assert!(close(s.value, 1.0, 1e-15));
        assert!(s.d1.abs() < 1e-15);
        assert!(close(s.d2, -1.0, 1e-15));
    }

    #[test]
    fn constants_stay_constant() {
        for op in Unary::ALL {
            let c = Taylor2::constant(0.3).apply(op);
            assert_eq!((c.d1, c.d2), (0.0, 0.0), "{op}");
        }
    }

    #[test]
    fn relu_kink_convention() {
        let z = seed_input(0.0).apply(Unary::Relu);
        assert_eq!((z.value, z.d1, z.d2), (0.0, 0.0, 0.0));
        let p = seed_input(2.0).apply(Unary::Relu);
        assert_eq!((p.value, p.d1, p.d2), (2.0, 1.0, 0.0));
    }

    #[test]
    fn third_derivatives_match_finite_differences() {
        let h = 1e-5;
        for op in Unary::ALL {
            for &x in &[-2.1, -0.4, 0.3, 1.7] {
                let d = op.derivs3(x);
                let (f, f1, f2) = op.derivs(x);
                assert!(close(d[0], f, 1e-14) && close(d[1], f1, 1e-14) && close(d[2], f2, 1e-14));
                let fd3 = (op.derivs3(x + h)[2] - op.derivs3(x - h)[2]) / (2.0 * h);
                assert!(close(d[3], fd3, 1e-7), "{op} at {x}: {} vs {fd3}", d[3]);
            }
        }
    }

    #[test]
    fn unknown_primitive_is_config_error() {
        assert!(matches!("gelu".parse::<Primitive>(), Err(Error::Config(_))));
        assert!(matches!("sine".parse::<Primitive>(), Ok(Primitive::Unary(Unary::Sin))));
        let x = seed_input(1.0);
        assert!(matches!(taylor_apply(Primitive::Add, &[x]), Err(Error::Contract(_))));
    }

    #[test]
    fn product_rule() {
        // (t²)'' = 2
        let t = seed_input(3.0);
        let sq = t * t;
        assert_eq!((sq.value, sq.d1, sq.d2), (9.0, 6.0, 2.0));
        let m = Taylor2::constant(2.0).lift(&0.0).mul_series(seed_input(3.0));
        assert_eq!((m.value, m.d1, m.d2), (6.0, 2.0, 0.0));
    }
}
