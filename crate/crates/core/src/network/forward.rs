//! Pointwise network evaluation, generic over the scalar type.

use super::{ComponentTransform, FeatureMap, NetworkSpec, OutputTransform};
use crate::autodiff::{Real, Taylor2, Unary};
use crate::error::Result;

/// Feature-layer values for input series `t`.
pub fn feature_series(map: &FeatureMap, t: Taylor2) -> Vec<Taylor2> {
    match *map {
        FeatureMap::Identity => vec![t],
        FeatureMap::Sinusoidal { n, include_raw } => {
            let mut f: Vec<Taylor2> =
                (1..=n).map(|k| t.scale(k as f64).apply(Unary::Sin)).collect();
            if include_raw {
                f.push(t);
            }
            f
        }
    }
}

/// Raw network outputs (before output transforms) for the given features.
pub fn body_generic<S: Real>(spec: &NetworkSpec, params: &[S], feats: &[Taylor2]) -> Vec<Taylor2<S>> {
    let dims = spec.layer_dims();
    let offsets = spec.layer_offsets();
    let act = spec.activation.unary();
    let anchor = params[0];

    // First layer consumes float features.
    let (w_at, b_at) = offsets[0];
    let (n_in, n_out) = (dims[0], dims[1]);
    let mut h: Vec<Taylor2<S>> = (0..n_out)
        .map(|j| {
            let row = &params[w_at + j * n_in..w_at + (j + 1) * n_in];
            let mut z = Taylor2 { value: params[b_at + j], d1: anchor.lift(0.0), d2: anchor.lift(0.0) };
            for (w, x) in row.iter().zip(feats) {
                z = z + Taylor2 { value: w.scale(x.value), d1: w.scale(x.d1), d2: w.scale(x.d2) };
            }
            z
        })
        .collect();
    if dims.len() > 2 {
        h.iter_mut().for_each(|z| *z = z.apply(act));
    }

    for l in 1..offsets.len() {
        let (w_at, b_at) = offsets[l];
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let hidden = l + 1 < offsets.len();
        h = (0..n_out)
            .map(|j| {
                let row = &params[w_at + j * n_in..w_at + (j + 1) * n_in];
                let mut z = Taylor2 { value: params[b_at + j], d1: anchor.lift(0.0), d2: anchor.lift(0.0) };
                for (&w, x) in row.iter().zip(&h) {
                    z = z + Taylor2 { value: w * x.value, d1: w * x.d1, d2: w * x.d2 };
                }
                if hidden {
                    z.apply(act)
                } else {
                    z
                }
            })
            .collect();
    }
    h
}

/// Apply output transforms at input series `t`.
pub fn apply_transform<S: Real>(transform: &OutputTransform, t: Taylor2, raw: &mut [Taylor2<S>]) {
    for (j, u) in raw.iter_mut().enumerate() {
        *u = transform_component(transform.get(j), t, *u);
    }
}

#[inline]
pub(crate) fn transform_component<S: Real>(c: ComponentTransform, t: Taylor2, raw: Taylor2<S>) -> Taylor2<S> {
    match c {
        ComponentTransform::Identity => raw,
        ComponentTransform::HardIc { t0, u0, v0: None } => raw.mul_series(t.offset(-t0)).offset(u0),
        ComponentTransform::HardIc { t0, u0, v0: Some(v0) } => {
            let tau = t.offset(-t0);
            raw.mul_series(tau * tau).add_series(tau.scale(v0).offset(u0))
        }
        ComponentTransform::Positivity => raw.apply(Unary::Softplus),
    }
}

/// `û(t)` with its time derivatives, on any scalar type.
pub fn forward_generic<S: Real>(spec: &NetworkSpec, params: &[S], t: Taylor2) -> Vec<Taylor2<S>> {
    let feats = spec.features(t);
    let mut out = body_generic(spec, params, &feats);
    apply_transform(&spec.output_transform, t, &mut out);
    out
}

/// `û(t)` with its time derivatives.
pub fn forward(spec: &NetworkSpec, theta: &[f64], t: Taylor2) -> Result<Vec<Taylor2>> {
    spec.check_params(theta)?;
    Ok(forward_generic(spec, theta, t))
}
