//! Batched Taylor-mode evaluation and its reverse sweep.
//!
//! All points of a batch travel through the network together. For each layer
//! the Taylor components are stored side by side, so a `k × (C·n)` matrix holds
//! component `c` of point `p` in column `c·n + p`. The affine maps are then a
//! single GEMM per layer and direction, and the activation's second-order
//! chain rule is applied elementwise:
//!
//! ```text
//! h0 = σ(z0)   h1 = σ'(z0)·z1   h2 = σ''(z0)·z1² + σ'(z0)·z2
//! ```
//!
//! The reverse sweep differentiates exactly these formulas, which is why the
//! activation's third derivative appears.

use super::NetworkSpec;
use crate::autodiff::{Taylor2, Unary};

/// Number of Taylor components carried by a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Comps {
    Value = 1,
    First = 2,
    Second = 3,
}

impl Comps {
    pub fn count(self) -> usize {
        self as usize
    }

    /// Components needed to evaluate derivatives up to `order`.
    pub fn for_order(order: usize) -> Comps {
        match order {
            0 => Comps::Value,
            1 => Comps::First,
            _ => Comps::Second,
        }
    }
}

struct HiddenCache {
    z: Vec<f64>,
    h: Vec<f64>,
    /// σ', σ'', σ''' at z0, each `m × n`.
    d: [Vec<f64>; 3],
}

/// Reusable batched evaluator of the raw network (no output transform).
pub struct BatchNet {
    dims: Vec<usize>,
    offsets: Vec<(usize, usize)>,
    act: Unary,
    n: usize,
    comps: usize,
    times: Vec<f64>,
    input: Vec<f64>,
    hidden: Vec<HiddenCache>,
    out: Vec<f64>,
    buf_a: Vec<f64>,
    buf_b: Vec<f64>,
}

impl BatchNet {
    pub fn new(spec: &NetworkSpec, times: &[f64], comps: Comps) -> Self {
        let dims = spec.layer_dims();
        let n = times.len();
        let c = comps.count();
        let cols = c * n;
        let d0 = dims[0];
        let mut input = vec![0.0; d0 * cols];
        for (p, &t) in times.iter().enumerate() {
            for (k, f) in spec.features(Taylor2::seed(t)).iter().enumerate() {
                let row = &mut input[k * cols..(k + 1) * cols];
                row[p] = f.value;
                if c > 1 {
                    row[n + p] = f.d1;
                }
                if c > 2 {
                    row[2 * n + p] = f.d2;
                }
            }
        }
        let hidden = dims[1..dims.len() - 1]
            .iter()
            .map(|&m| HiddenCache {
                z: vec![0.0; m * cols],
                h: vec![0.0; m * cols],
                d: [vec![0.0; m * n], vec![0.0; m * n], vec![0.0; m * n]],
            })
            .collect();
        let widest = dims.iter().copied().max().unwrap_or(1);
        BatchNet {
            out: vec![0.0; dims[dims.len() - 1] * cols],
            offsets: spec.layer_offsets(),
            act: spec.activation.unary(),
            n,
            comps: c,
            times: times.to_vec(),
            input,
            hidden,
            buf_a: vec![0.0; widest * cols],
            buf_b: vec![0.0; widest * cols],
            dims,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Raw outputs, `d_out × (C·n)`.
    pub fn output(&self) -> &[f64] {
        &self.out
    }

    /// Component `c` of raw output `j` at point `p`.
    #[inline]
    pub fn raw(&self, j: usize, c: usize, p: usize) -> f64 {
        if c >= self.comps {
            return 0.0;
        }
        self.out[j * self.comps * self.n + c * self.n + p]
    }

    /// Raw output `j` at point `p` as a series (missing components are zero).
    pub fn raw_series(&self, j: usize, p: usize) -> Taylor2 {
        Taylor2 { value: self.raw(j, 0, p), d1: self.raw(j, 1, p), d2: self.raw(j, 2, p) }
    }

    pub fn forward(&mut self, theta: &[f64]) -> &[f64] {
        let (n, c) = (self.n, self.comps);
        let cols = n * c;
        let layers = self.offsets.len();
        for l in 0..layers {
            let (k, m) = (self.dims[l], self.dims[l + 1]);
            let (w_at, b_at) = self.offsets[l];
            let w = &theta[w_at..w_at + m * k];
            let b = &theta[b_at..b_at + m];
            let split = l.min(self.hidden.len());
            let (before, rest) = self.hidden.split_at_mut(split);
            let x: &[f64] = if l == 0 { &self.input } else { &before[l - 1].h };
            let z: &mut [f64] = if l + 1 < layers { &mut rest[0].z } else { &mut self.out };
            gemm(m, k, cols, w, (k, 1), x, (cols, 1), z, (cols, 1), 0.0);
            for i in 0..m {
                z[i * cols..i * cols + n].iter_mut().for_each(|v| *v += b[i]);
            }
            if l + 1 < layers {
                activate(self.act, m, n, c, &mut rest[0]);
            }
        }
        &self.out
    }

    /// Accumulate `∂L/∂θ` into `grad`, given `∂L/∂(raw outputs)` laid out like
    /// [`output`](Self::output). Must follow a [`forward`](Self::forward) at
    /// the same `theta`.
    pub fn backward(&mut self, theta: &[f64], d_out: &[f64], grad: &mut [f64]) {
        let (n, c) = (self.n, self.comps);
        let cols = n * c;
        let layers = self.offsets.len();
        let mut cur = std::mem::take(&mut self.buf_a);
        let mut prev = std::mem::take(&mut self.buf_b);
        cur[..d_out.len()].copy_from_slice(d_out);
        for l in (0..layers).rev() {
            let (k, m) = (self.dims[l], self.dims[l + 1]);
            let (w_at, b_at) = self.offsets[l];
            let x: &[f64] = if l == 0 { &self.input } else { &self.hidden[l - 1].h };
            let dz = &cur[..m * cols];
            gemm(m, cols, k, dz, (cols, 1), x, (1, cols), &mut grad[w_at..w_at + m * k], (k, 1), 1.0);
            for i in 0..m {
                grad[b_at + i] += dz[i * cols..i * cols + n].iter().sum::<f64>();
            }
            if l > 0 {
                let w = &theta[w_at..w_at + m * k];
                gemm(k, m, cols, w, (1, k), dz, (cols, 1), &mut prev[..k * cols], (cols, 1), 0.0);
                activate_backward(k, n, c, &self.hidden[l - 1], &mut prev[..k * cols]);
                std::mem::swap(&mut cur, &mut prev);
            }
        }
        self.buf_a = cur;
        self.buf_b = prev;
    }
}

fn activate(act: Unary, m: usize, n: usize, c: usize, cache: &mut HiddenCache) {
    let cols = n * c;
    let HiddenCache { z, h, d } = cache;
    let [d1, d2, d3] = d;
    for i in 0..m {
        let zr = &z[i * cols..(i + 1) * cols];
        let hr = &mut h[i * cols..(i + 1) * cols];
        for p in 0..n {
            let s = act.derivs3(zr[p]);
            hr[p] = s[0];
            d1[i * n + p] = s[1];
            d2[i * n + p] = s[2];
            d3[i * n + p] = s[3];
            if c > 1 {
                let z1 = zr[n + p];
                hr[n + p] = s[1] * z1;
                if c > 2 {
                    hr[2 * n + p] = s[2] * z1 * z1 + s[1] * zr[2 * n + p];
                }
            }
        }
    }
}

/// Turn `∂L/∂h` into `∂L/∂z` in place.
fn activate_backward(m: usize, n: usize, c: usize, cache: &HiddenCache, g: &mut [f64]) {
    let cols = n * c;
    let [d1, d2, d3] = &cache.d;
    for i in 0..m {
        let zr = &cache.z[i * cols..(i + 1) * cols];
        let gr = &mut g[i * cols..(i + 1) * cols];
        for p in 0..n {
            let q = i * n + p;
            match c {
                1 => gr[p] *= d1[q],
                2 => {
                    let (g0, g1, z1) = (gr[p], gr[n + p], zr[n + p]);
                    gr[p] = g0 * d1[q] + g1 * d2[q] * z1;
                    gr[n + p] = g1 * d1[q];
                }
                _ => {
                    let (g0, g1, g2) = (gr[p], gr[n + p], gr[2 * n + p]);
                    let (z1, z2) = (zr[n + p], zr[2 * n + p]);
                    gr[p] = g0 * d1[q] + g1 * d2[q] * z1 + g2 * (d3[q] * z1 * z1 + d2[q] * z2);
                    gr[n + p] = g1 * d1[q] + 2.0 * g2 * d2[q] * z1;
                    gr[2 * n + p] = g2 * d1[q];
                }
            }
        }
    }
}

/// `C = A·B + beta·C` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |r: usize, cc: usize, rs: usize, cs: usize| (r - 1) * rs + (cc - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= span(m, k, rsa, csa));
        assert!(b.len() >= span(k, n, rsb, csb));
    }
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the assertions above keep every strided access within the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Real, Tape};
    use crate::network::{body_generic, init_params, Activation, FeatureMap, NetworkSpec};
    use crate::random::NormalStream;

    fn perturbed(spec: &NetworkSpec, seed: u64) -> Vec<f64> {
        let mut rng = NormalStream::new(seed + 100);
        let mut theta = init_params(spec, seed).0;
        theta.iter_mut().for_each(|w| *w += 0.2 * rng.normal());
        theta
    }

    #[test]
    fn forward_matches_pointwise() {
        for act in [Activation::Tanh, Activation::Sine, Activation::Sigmoid, Activation::Swish] {
            let spec = NetworkSpec::new(3, 7, act, 2).with_features(FeatureMap::sinusoidal(4));
            let theta = perturbed(&spec, 3);
            let times = [0.0, 0.3, 1.1, -0.7, 2.0];
            let mut net = BatchNet::new(&spec, &times, Comps::Second);
            net.forward(&theta);
            for (p, &t) in times.iter().enumerate() {
                let feats = spec.features(Taylor2::seed(t));
                let want = body_generic(&spec, &theta, &feats);
                for j in 0..2 {
                    let got = net.raw_series(j, p);
                    assert!((got.value - want[j].value).abs() < 1e-12);
                    assert!((got.d1 - want[j].d1).abs() < 1e-11);
                    assert!((got.d2 - want[j].d2).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn backward_matches_tape() {
        // Loss = Σ_p Σ_j (a·u + b·u' + c·u'')² with fixed coefficients.
        let coef = [0.7, -0.4, 0.25];
        for comps in [Comps::Value, Comps::First, Comps::Second] {
            let spec = NetworkSpec::new(2, 5, Activation::Tanh, 2);
            let theta = perturbed(&spec, 8);
            let times = [0.1, 0.5, 0.9];
            let c = comps.count();

            let tape = Tape::new();
            let params = tape.params(&theta);
            let mut loss = params[0].lift(0.0);
            for &t in &times {
                let feats = spec.features(Taylor2::seed(t));
                for u in body_generic(&spec, &params, &feats) {
                    let parts = [u.value, u.d1, u.d2];
                    let mut s = params[0].lift(0.0);
                    for q in 0..c {
                        s = s + parts[q].scale(coef[q]);
                    }
                    loss = loss + s.square();
                }
            }
            let want = tape.backward(loss.id()).unwrap();

            let mut net = BatchNet::new(&spec, &times, comps);
            net.forward(&theta);
            let n = times.len();
            let mut d_out = vec![0.0; 2 * c * n];
            for j in 0..2 {
                for p in 0..n {
                    let s: f64 = (0..c).map(|q| coef[q] * net.raw(j, q, p)).sum();
                    for q in 0..c {
                        d_out[j * c * n + q * n + p] = 2.0 * s * coef[q];
                    }
                }
            }
            let mut got = vec![0.0; theta.len()];
            net.backward(&theta, &d_out, &mut got);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()), "{comps:?}: {g} vs {w}");
            }
        }
    }
}
