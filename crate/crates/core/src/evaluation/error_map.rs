use serde::{Deserialize, Serialize};

use super::Table;
use crate::error::{Error, Result};
use crate::neurvec::NeurVecModel;
use crate::solvers::Scheme;
use crate::systems::{StateBatch, System, SystemId};

/// Inclusive node grid over `(theta, theta_dot)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub theta: (f64, f64),
    pub theta_dot: (f64, f64),
    pub nodes_theta: usize,
    pub nodes_theta_dot: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            theta: (0.0, std::f64::consts::FRAC_PI_2),
            theta_dot: (0.0, 0.5),
            nodes_theta: 64,
            nodes_theta_dot: 64,
        }
    }
}

impl GridSpec {
    fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
        match n {
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    /// Nodes with `theta` varying slowest.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let th = Self::axis(self.theta, self.nodes_theta);
        let om = Self::axis(self.theta_dot, self.nodes_theta_dot);
        th.iter().flat_map(|&t| om.iter().map(move |&w| [t, w])).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.nodes_theta == 0 || self.nodes_theta_dot == 0 {
            return Err(Error::InvalidConfig("error-map grid needs at least one node per axis".into()));
        }
        let finite = [self.theta.0, self.theta.1, self.theta_dot.0, self.theta_dot.1].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("error-map grid bounds must be finite".into()));
        }
        Ok(())
    }
}

/// Squared norms of the Euler leading error term, the learned corrector, and
/// their difference at every grid node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorField {
    pub grid: GridSpec,
    pub dt: f64,
    pub nodes: Vec<[f64; 2]>,
    pub r_el: Vec<f64>,
    pub r_nv: Vec<f64>,
    pub r_diff: Vec<f64>,
}

impl ErrorField {
    pub fn median_r_el(&self) -> f64 {
        median(&self.r_el)
    }

    pub fn median_r_nv(&self) -> f64 {
        median(&self.r_nv)
    }

    pub fn median_r_diff(&self) -> f64 {
        median(&self.r_diff)
    }

    /// Columns `theta theta_dot r_el r_nv r_diff`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["theta", "theta_dot", "r_el", "r_nv", "r_diff"]);
        for (i, n) in self.nodes.iter().enumerate() {
            t.push(vec![n[0], n[1], self.r_el[i], self.r_nv[i], self.r_diff[i]]);
        }
        t
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

/// Compares a 1-link pendulum Euler corrector with the analytic leading
/// error term `0.5 (grad f) f dt^2` at the model's coarse step.
pub fn error_map(model: &NeurVecModel, system: &System, grid: &GridSpec) -> Result<ErrorField> {
    grid.validate()?;
    let is_one_link = matches!(system, System::KLinkPendulum(p) if p.links == 1);
    if !is_one_link || model.meta.system != SystemId::KLinkPendulum || model.meta.scheme != Scheme::Euler {
        return Err(Error::ModelSystemMismatch {
            expected: "1-link pendulum with the Euler scheme".into(),
            found: format!("{} with scheme {} (system {})", model.meta.system, model.meta.scheme, system.id()),
        });
    }
    model.check_compatible(system, Scheme::Euler, model.meta.coarse_dt())?;

    let dt = model.meta.coarse_dt();
    let nodes = grid.nodes();
    let rows: Vec<Vec<f64>> = nodes.iter().map(|n| n.to_vec()).collect();
    let states = StateBatch::from_rows(&rows)?;
    let f = system.rhs(&states)?;
    let nv = model.forward(&states)?;

    let mut field = ErrorField {
        grid: *grid,
        dt,
        nodes: nodes.clone(),
        r_el: Vec::with_capacity(nodes.len()),
        r_nv: Vec::with_capacity(nodes.len()),
        r_diff: Vec::with_capacity(nodes.len()),
    };
    for (i, node) in nodes.iter().enumerate() {
        let j = system.one_link_jacobian(node).expect("1-link system");
        let fi = f.row(i);
        let lead = [
            0.5 * dt * dt * (j[0][0] * fi[0] + j[0][1] * fi[1]),
            0.5 * dt * dt * (j[1][0] * fi[0] + j[1][1] * fi[1]),
        ];
        let c = nv.row(i);
        field.r_el.push(lead[0] * lead[0] + lead[1] * lead[1]);
        field.r_nv.push(c[0] * c[0] + c[1] * c[1]);
        field.r_diff.push((lead[0] - c[0]).powi(2) + (lead[1] - c[1]).powi(2));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurvec::ModelMeta;

    fn meta(system: SystemId, scheme: Scheme) -> ModelMeta {
        ModelMeta { system, scheme, k: 100, fine_dt: 1e-3, eta: 0.1, seed: 0 }
    }

    #[test]
    fn zero_model_gives_r_diff_equal_r_el() {
        let model = NeurVecModel::zeros(2, 8, meta(SystemId::KLinkPendulum, Scheme::Euler));
        let field = error_map(&model, &System::k_link(1), &GridSpec::default()).unwrap();
        assert_eq!(field.nodes.len(), 64 * 64);
        assert_eq!(field.r_el[0], 0.0);
        assert!(field.r_nv.iter().all(|&v| v == 0.0));
        assert_eq!(field.r_diff, field.r_el);
    }

    #[test]
    fn leading_term_closed_form() {
        let model = NeurVecModel::zeros(2, 4, meta(SystemId::KLinkPendulum, Scheme::Euler));
        let grid = GridSpec { theta: (0.7, 0.7), theta_dot: (0.3, 0.3), nodes_theta: 1, nodes_theta_dot: 1 };
        let field = error_map(&model, &System::k_link(1), &grid).unwrap();
        let (g, dt, th, w): (f64, f64, f64, f64) = (9.8, 0.1, 0.7, 0.3);
        let a = 0.5 * dt * dt * (-g * th.sin());
        let b = 0.5 * dt * dt * (-g * th.cos() * w);
        approx::assert_relative_eq!(field.r_el[0], a * a + b * b, max_relative = 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_grid() {
        let sys = System::k_link(1);
        let grid = GridSpec { nodes_theta: 9, nodes_theta_dot: 9, ..GridSpec::default() };
        let h = 1e-6;
        for node in grid.nodes() {
            let j = sys.one_link_jacobian(&node).unwrap();
            for col in 0..2 {
                let mut plus = node;
                let mut minus = node;
                plus[col] += h;
                minus[col] -= h;
                let batch = StateBatch::from_rows(&[plus.to_vec(), minus.to_vec()]).unwrap();
                let f = sys.rhs(&batch).unwrap();
                for row in 0..2 {
                    let fd = (f.row(0)[row] - f.row(1)[row]) / (2.0 * h);
                    let exact = j[row][col];
                    let err = (fd - exact).abs() / exact.abs().max(1.0);
                    assert!(err < 1e-8, "node {node:?} entry ({row},{col}): {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn rejects_other_settings() {
        let rk4 = NeurVecModel::zeros(2, 4, meta(SystemId::KLinkPendulum, Scheme::Rk4));
        assert!(matches!(
            error_map(&rk4, &System::k_link(1), &GridSpec::default()),
            Err(Error::ModelSystemMismatch { .. })
        ));
        let two = NeurVecModel::zeros(4, 4, meta(SystemId::KLinkPendulum, Scheme::Euler));
        assert!(error_map(&two, &System::k_link(2), &GridSpec::default()).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
