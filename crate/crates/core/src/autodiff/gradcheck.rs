use crate::error::{Error, Result};
use crate::objective::Objective;

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// `max_k |analytic_k − fd_k| / max(1, |fd_k|)`.
    pub max_discrepancy: f64,
    /// Parameter index where the maximum occurs.
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
}

/// Central finite-difference gradient of `obj` at `theta` with step `h`.
pub fn central_difference<O: Objective + ?Sized>(
    obj: &mut O,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let mut x = theta.to_vec();
    let mut fd = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        x[k] = theta[k] + h;
        let fp = obj.value(&x)?;
        x[k] = theta[k] - h;
        let fm = obj.value(&x)?;
        x[k] = theta[k];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss perturbing parameter {k}")));
        }
        fd.push((fp - fm) / (2.0 * h));
    }
    Ok(fd)
}

/// Compare the analytic gradient of `obj` with central differences.
pub fn grad_check<O: Objective + ?Sized>(obj: &mut O, theta: &[f64], h: f64) -> Result<GradCheck> {
    let mut analytic = vec![0.0; theta.len()];
    let f0 = obj.value_and_grad(theta, &mut analytic)?;
    if !f0.is_finite() || analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite loss or gradient at the check point".into()));
    }
    let fd = central_difference(obj, theta, h)?;
    let (worst_index, max_discrepancy) = analytic
        .iter()
        .zip(&fd)
        .map(|(a, f)| (a - f).abs() / f.abs().max(1.0))
        .enumerate()
        .fold((0, 0.0), |best, (k, d)| if d > best.1 { (k, d) } else { best });
    Ok(GradCheck { max_discrepancy, worst_index, analytic, finite_difference: fd })
}
