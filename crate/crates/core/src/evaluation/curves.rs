use serde::{Deserialize, Serialize};

use super::Table;
use crate::error::{Error, Result};
use crate::solvers::Trajectory;
use crate::systems::System;

/// Per-time ensemble statistics: mean and the min/max envelope over trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MseCurve {
    fn from_rows(times: Vec<f64>, values: impl Fn(usize) -> Vec<f64>) -> Self {
        let mut curve = MseCurve { mean: vec![], min: vec![], max: vec![], times: vec![] };
        for (s, t) in times.into_iter().enumerate() {
            let v = values(s);
            curve.times.push(t);
            curve.mean.push(v.iter().sum::<f64>() / v.len() as f64);
            curve.min.push(v.iter().copied().fold(f64::INFINITY, f64::min));
            curve.max.push(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        curve
    }

    /// Average of the mean curve over all recorded times.
    pub fn time_average(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }

    /// Restricts to samples with `lo <= t <= hi` (with a small tolerance).
    pub fn window(&self, lo: f64, hi: f64) -> MseCurve {
        let tol = 1e-9 * hi.abs().max(1.0);
        let keep: Vec<usize> =
            (0..self.times.len()).filter(|&i| self.times[i] >= lo - tol && self.times[i] <= hi + tol).collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect();
        MseCurve { times: pick(&self.times), mean: pick(&self.mean), min: pick(&self.min), max: pick(&self.max) }
    }

    /// Columns `time mean min max`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["time", "mean", "min", "max"]);
        for i in 0..self.times.len() {
            t.push(vec![self.times[i], self.mean[i], self.min[i], self.max[i]]);
        }
        t
    }
}

/// Squared error averaged over state dimensions per trajectory, then
/// mean/min/max over trajectories at each sample time.
pub fn mse_curve(pred: &Trajectory, reference: &Trajectory) -> Result<MseCurve> {
    if pred.n != reference.n || pred.d != reference.d || pred.samples() != reference.samples() {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}x{}, reference is {}x{}x{}",
            pred.samples(),
            pred.n,
            pred.d,
            reference.samples(),
            reference.n,
            reference.d
        )));
    }
    let scale = 1e-9 * pred.times.last().copied().unwrap_or(1.0).abs().max(1.0);
    if pred.times.iter().zip(&reference.times).any(|(a, b)| (a - b).abs() > scale) {
        return Err(Error::TimeAxisMismatch);
    }
    Ok(MseCurve::from_rows(pred.times.clone(), |s| {
        (0..pred.n)
            .map(|row| {
                let a = pred.state(s, row);
                let b = reference.state(s, row);
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / pred.d as f64
            })
            .collect()
    }))
}

/// `|H(u(t)) - H(u(0))|` per trajectory, summarized like [`mse_curve`].
pub fn energy_error_curve(traj: &Trajectory, system: &System) -> Result<MseCurve> {
    let energies: Vec<Vec<f64>> =
        (0..traj.samples()).map(|s| system.energy(&traj.snapshot(s))).collect::<Result<_>>()?;
    Ok(MseCurve::from_rows(traj.times.clone(), |s| {
        energies[s].iter().zip(&energies[0]).map(|(h, h0)| (h - h0).abs()).collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(times: Vec<f64>, n: usize, d: usize, states: Vec<f64>) -> Trajectory {
        Trajectory { times, n, d, states }
    }

    #[test]
    fn identical_trajectories_give_zero() {
        let t = traj(vec![0.0, 1.0], 2, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let c = mse_curve(&t, &t).unwrap();
        assert!(c.mean.iter().chain(&c.min).chain(&c.max).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_offset() {
        let a = traj(vec![0.0, 0.5, 1.0], 1, 1, vec![1.0, 2.0, 3.0]);
        let b = traj(vec![0.0, 0.5, 1.0], 1, 1, vec![1.25, 2.25, 3.25]);
        let c = mse_curve(&a, &b).unwrap();
        assert_eq!(c.mean, vec![0.0625; 3]);
    }

    #[test]
    fn brute_force_three_trajectories() {
        // samples x n x d = 2 x 3 x 2
        let pred = traj(vec![0.0, 1.0], 3, 2, vec![0., 0., 1., 1., 2., 2., 0., 1., 3., 0., -1., 2.]);
        let refr = traj(vec![0.0, 1.0], 3, 2, vec![0., 0., 1., 2., 0., 2., 1., 1., 0., 0., 1., 1.]);
        let c = mse_curve(&pred, &refr).unwrap();
        for s in 0..2 {
            let mut errs = Vec::new();
            for r in 0..3 {
                let mut acc = 0.0;
                for k in 0..2 {
                    let i = (s * 3 + r) * 2 + k;
                    acc += (pred.states[i] - refr.states[i]).powi(2);
                }
                errs.push(acc / 2.0);
            }
            assert_eq!(c.mean[s], errs.iter().sum::<f64>() / 3.0);
            assert_eq!(c.min[s], errs.iter().cloned().fold(f64::MAX, f64::min));
            assert_eq!(c.max[s], errs.iter().cloned().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn mismatches_are_errors() {
        let a = traj(vec![0.0, 1.0], 1, 1, vec![0.0, 0.0]);
        let b = traj(vec![0.0, 2.0], 1, 1, vec![0.0, 0.0]);
        let c = traj(vec![0.0], 1, 1, vec![0.0]);
        assert!(matches!(mse_curve(&a, &b), Err(Error::TimeAxisMismatch)));
        assert!(matches!(mse_curve(&a, &c), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn energy_error_needs_henon_heiles() {
        let a = traj(vec![0.0], 1, 4, vec![0.1, 10.0, 0.0, 0.0]);
        assert!(energy_error_curve(&a, &System::elastic_pendulum()).is_err());
        let hh = traj(vec![0.0, 1.0], 1, 4, vec![0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.3]);
        let c = energy_error_curve(&hh, &System::henon_heiles()).unwrap();
        assert_eq!(c.mean, vec![0.0, 0.0]);
    }
}
