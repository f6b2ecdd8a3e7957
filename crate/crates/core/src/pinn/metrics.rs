use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;

/// Relative L2 error over all components, and per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Error {
    pub total: f64,
    /// `None` where that component of the reference is identically zero.
    pub per_component: Vec<Option<f64>>,
}

/// `‖pred − reference‖₂ / ‖reference‖₂` for flat vectors.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Contract(format!(
            "prediction has {} values, reference has {}",
            pred.len(),
            reference.len()
        )));
    }
    let den: f64 = reference.iter().map(|u| u * u).sum();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = pred.iter().zip(reference).map(|(p, u)| (p - u) * (p - u)).sum();
    Ok((num / den).sqrt())
}

/// Relative L2 error between two trajectories sampled at the same times.
pub fn l2_relative_error(pred: &Trajectory, reference: &Trajectory) -> Result<L2Error> {
    if pred.len() != reference.len() {
        return Err(Error::Contract(format!(
            "prediction has {} samples, reference has {}",
            pred.len(),
            reference.len()
        )));
    }
    let d = reference.states.first().map_or(0, Vec::len);
    if pred.states.iter().chain(&reference.states).any(|s| s.len() != d) {
        return Err(Error::Contract("trajectories have mismatched state widths".into()));
    }
    let flat = |tr: &Trajectory| tr.states.iter().flatten().copied().collect::<Vec<f64>>();
    let total = relative_l2(&flat(pred), &flat(reference))?;
    let per_component = (0..d)
        .map(|j| relative_l2(&pred.component(j), &reference.component(j)).ok())
        .collect();
    Ok(L2Error { total, per_component })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::SolverInfo;

    fn traj(states: Vec<Vec<f64>>) -> Trajectory {
        Trajectory { times: (0..states.len()).map(|i| i as f64).collect(), states, info: SolverInfo::default() }
    }

    #[test]
    fn basic_values() {
        let r = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(relative_l2(&r, &r).unwrap(), 0.0);
        assert_eq!(relative_l2(&[0.0; 4], &r).unwrap(), 1.0);
        let scaled: Vec<f64> = r.iter().map(|v| 1.1 * v).collect();
        assert!((relative_l2(&scaled, &r).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(relative_l2(&[1.0], &[0.0]), Err(Error::ZeroReference));
    }

    #[test]
    fn per_component() {
        let reference = traj(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        let pred = traj(vec![vec![1.0, 1.0], vec![2.0, 0.0]]);
        let e = l2_relative_error(&pred, &reference).unwrap();
        assert!((e.total - (1.0f64 / 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.per_component, vec![Some(0.0), None]);
        let zero = traj(vec![vec![0.0, 0.0]]);
        assert_eq!(l2_relative_error(&zero, &zero), Err(Error::ZeroReference));
    }
}
