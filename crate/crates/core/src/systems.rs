//! Benchmark dynamical systems: state layout, right-hand sides, initial
//! condition samplers and conserved quantities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{streams, SeedStream};

/// Any component whose magnitude exceeds this is treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Hénon-Heiles initial states are kept only if their energy lies in this band.
pub const HENON_HEILES_ENERGY_BAND: (f64, f64) = (1.0 / 12.0, 1.0 / 6.0);

/// Rejection sampling gives up after this many draws per requested row.
pub const REJECTION_DRAWS_PER_ROW: usize = 10_000;

/// Masses of the reference 20-mass spring chain, row-major from the published table.
pub const SPRING_CHAIN_MASSES: [f64; 20] = [
    0.900, 0.938, 0.925, 0.787, 0.667, //
    1.348, 0.776, 0.692, 0.941, 0.538, //
    1.215, 0.821, 1.121, 0.875, 1.456, //
    1.111, 1.125, 1.431, 0.663, 1.222,
];

/// Stiffnesses of the 21 springs of the reference chain, row-major.
pub const SPRING_CHAIN_STIFFNESS: [f64; 21] = [
    3.900, 3.508, 5.651, 5.533, 3.664, //
    4.373, 2.555, 5.239, 6.024, 6.942, //
    5.073, 3.941, 4.505, 4.744, 3.805, //
    4.848, 3.477, 3.405, 2.499, 4.735, 4.891,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemId {
    SpringChain,
    HenonHeiles,
    ElasticPendulum,
    KLinkPendulum,
}

impl SystemId {
    pub fn name(self) -> &'static str {
        match self {
            SystemId::SpringChain => "spring-chain",
            SystemId::HenonHeiles => "henon-heiles",
            SystemId::ElasticPendulum => "elastic-pendulum",
            SystemId::KLinkPendulum => "k-link-pendulum",
        }
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `d` masses joined by `d + 1` springs between two fixed walls.
///
/// State layout is `(q_1..q_d, p_1..p_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringChainParams {
    pub masses: Vec<f64>,
    pub stiffness: Vec<f64>,
}

impl Default for SpringChainParams {
    fn default() -> Self {
        Self { masses: SPRING_CHAIN_MASSES.to_vec(), stiffness: SPRING_CHAIN_STIFFNESS.to_vec() }
    }
}

impl SpringChainParams {
    pub fn masses(&self) -> usize {
        self.masses.len()
    }

    /// Total mechanical energy of one state row.
    pub fn energy(&self, row: &[f64]) -> f64 {
        let d = self.masses();
        let (q, p) = row.split_at(d);
        let kinetic: f64 = p.iter().zip(&self.masses).map(|(p, m)| p * p / (2.0 * m)).sum();
        let mut potential = 0.0;
        for i in 0..=d {
            let left = if i == 0 { 0.0 } else { q[i - 1] };
            let right = if i == d { 0.0 } else { q[i] };
            potential += 0.5 * self.stiffness[i] * (right - left).powi(2);
        }
        kinetic + potential
    }
}

/// State layout is `(q_x, q_y, p_x, p_y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HenonHeilesParams {
    pub lambda: f64,
}

impl Default for HenonHeilesParams {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

/// Point mass on a spring. State layout is `(theta, r, theta_dot, r_dot)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticPendulumParams {
    pub k: f64,
    pub m: f64,
    pub l0: f64,
    pub g: f64,
}

impl Default for ElasticPendulumParams {
    fn default() -> Self {
        Self { k: 40.0, m: 1.0, l0: 10.0, g: 9.8 }
    }
}

/// Chain of `links` unit rods with unit bobs.
///
/// State layout is `(theta_1..theta_K, theta_dot_1..theta_dot_K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KLinkPendulumParams {
    pub links: usize,
    pub g: f64,
}

impl Default for KLinkPendulumParams {
    fn default() -> Self {
        Self { links: 2, g: 9.8 }
    }
}

impl KLinkPendulumParams {
    fn weight(&self, i: usize, j: usize) -> f64 {
        // 0-based form of K - max(i, j) + 1
        (self.links - i.max(j)) as f64
    }

    /// Mass matrix `A` (row-major) and force vector `b` of the K-link
    /// equations of motion `A theta_ddot = b`.
    pub fn matrix(&self, theta: &[f64], theta_dot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.links;
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        self.fill_matrix(theta, theta_dot, &mut a, &mut b);
        (a, b)
    }

    fn fill_matrix(&self, theta: &[f64], theta_dot: &[f64], a: &mut [f64], b: &mut [f64]) {
        let k = self.links;
        for i in 0..k {
            let mut bi = 0.0;
            for j in 0..k {
                let c = self.weight(i, j);
                let delta = theta[i] - theta[j];
                a[i * k + j] = c * delta.cos();
                bi -= c * theta_dot[j] * theta_dot[j] * delta.sin();
            }
            b[i] = bi - (k - i) as f64 * self.g * theta[i].sin();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum System {
    SpringChain(SpringChainParams),
    HenonHeiles(HenonHeilesParams),
    ElasticPendulum(ElasticPendulumParams),
    KLinkPendulum(KLinkPendulumParams),
}

/// `n` states of dimension `d`, stored row-major, advanced in lockstep.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBatch {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl StateBatch {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![0.0; n * d] }
    }

    pub fn from_vec(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot form a {n}x{d} batch",
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n: rows.len(), d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copies the rows `range` into a new batch.
    pub fn select_rows(&self, range: std::ops::Range<usize>) -> StateBatch {
        StateBatch {
            n: range.len(),
            d: self.d,
            data: self.data[range.start * self.d..range.end * self.d].to_vec(),
        }
    }
}

impl System {
    pub fn spring_chain() -> Self {
        System::SpringChain(SpringChainParams::default())
    }

    pub fn henon_heiles() -> Self {
        System::HenonHeiles(HenonHeilesParams::default())
    }

    pub fn elastic_pendulum() -> Self {
        System::ElasticPendulum(ElasticPendulumParams::default())
    }

    pub fn k_link(links: usize) -> Self {
        System::KLinkPendulum(KLinkPendulumParams { links, g: 9.8 })
    }

    pub fn id(&self) -> SystemId {
        match self {
            System::SpringChain(_) => SystemId::SpringChain,
            System::HenonHeiles(_) => SystemId::HenonHeiles,
            System::ElasticPendulum(_) => SystemId::ElasticPendulum,
            System::KLinkPendulum(_) => SystemId::KLinkPendulum,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::SpringChain(p) => 2 * p.masses(),
            System::HenonHeiles(_) | System::ElasticPendulum(_) => 4,
            System::KLinkPendulum(p) => 2 * p.links,
        }
    }

    /// Checks parameter invariants (positive masses and stiffnesses, etc.).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        match self {
            System::SpringChain(p) => {
                if p.masses.is_empty() || p.stiffness.len() != p.masses.len() + 1 {
                    return bad("spring chain needs d masses and d + 1 stiffnesses");
                }
                if p.masses.iter().chain(&p.stiffness).any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return bad("spring chain masses and stiffnesses must be positive");
                }
            }
            System::HenonHeiles(p) => {
                if !p.lambda.is_finite() {
                    return bad("lambda must be finite");
                }
            }
            System::ElasticPendulum(p) => {
                if !(p.k > 0.0 && p.m > 0.0 && p.l0 > 0.0 && p.g.is_finite()) {
                    return bad("elastic pendulum needs positive k, m, l0");
                }
            }
            System::KLinkPendulum(p) => {
                if p.links == 0 || !p.g.is_finite() {
                    return bad("k-link pendulum needs at least one link");
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: d });
        }
        Ok(())
    }

    /// `du/dt` for every row of `states`.
    pub fn rhs(&self, states: &StateBatch) -> Result<StateBatch> {
        self.check_dim(states.d())?;
        let mut out = StateBatch::zeros(states.n(), states.d());
        self.rhs_into(states.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// Row-wise `du/dt` over a flat row-major buffer whose length is a
    /// multiple of [`System::dim`].
    pub fn rhs_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        debug_assert_eq!(u.len(), out.len());
        debug_assert_eq!(u.len() % d, 0);
        match self {
            System::SpringChain(p) => {
                let n = p.masses();
                for (row, du) in u.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    let (q, mom) = row.split_at(n);
                    let (dq, dp) = du.split_at_mut(n);
                    for i in 0..n {
                        dq[i] = mom[i] / p.masses[i];
                        let left = if i == 0 { 0.0 } else { q[i - 1] };
                        let right = if i + 1 == n { 0.0 } else { q[i + 1] };
                        dp[i] = p.stiffness[i] * (left - q[i]) + p.stiffness[i + 1] * (right - q[i]);
                    }
                }
            }
            System::HenonHeiles(p) => {
                let l = p.lambda;
                for (row, du) in u.chunks_exact(4).zip(out.chunks_exact_mut(4)) {
                    let (qx, qy, px, py) = (row[0], row[1], row[2], row[3]);
                    du[0] = px;
                    du[1] = py;
                    du[2] = -qx - 2.0 * l * qx * qy;
                    du[3] = -qy - l * (qx * qx - qy * qy);
                }
            }
            System::ElasticPendulum(p) => {
                let stiffness = p.k / p.m;
                for (row, du) in u.chunks_exact(4).zip(out.chunks_exact_mut(4)) {
                    let (theta, r, theta_dot, r_dot) = (row[0], row[1], row[2], row[3]);
                    let (s, c) = theta.sin_cos();
                    du[0] = theta_dot;
                    du[1] = r_dot;
                    du[2] = (-p.g * s - theta_dot * r_dot) / r;
                    du[3] = r * theta_dot * theta_dot - stiffness * (r - p.l0) + p.g * c;
                }
            }
            System::KLinkPendulum(p) => {
                let k = p.links;
                let mut a = vec![0.0; k * k];
                let mut b = vec![0.0; k];
                for (row, du) in u.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    let (theta, theta_dot) = row.split_at(k);
                    p.fill_matrix(theta, theta_dot, &mut a, &mut b);
                    linalg::solve_in_place(&mut a, &mut b, k)?;
                    du[..k].copy_from_slice(theta_dot);
                    du[k..].copy_from_slice(&b);
                }
            }
        }
        Ok(())
    }

    /// Analytic Jacobian of the right-hand side at one state, row-major.
    ///
    /// Available for the 1-link pendulum only, where `f = (w, -g sin(theta))`.
    pub fn one_link_jacobian(&self, state: &[f64]) -> Option<[[f64; 2]; 2]> {
        match self {
            System::KLinkPendulum(p) if p.links == 1 => {
                Some([[0.0, 1.0], [-p.g * state[0].cos(), 0.0]])
            }
            _ => None,
        }
    }

    /// Conserved energy per row. Only the Hénon-Heiles system implements it.
    pub fn energy(&self, states: &StateBatch) -> Result<Vec<f64>> {
        let System::HenonHeiles(p) = self else {
            return Err(Error::UnsupportedSystem(self.id()));
        };
        self.check_dim(states.d())?;
        Ok(states.rows().map(|row| henon_heiles_energy(p.lambda, row)).collect())
    }

    /// Rejects states that cannot be advanced: non-finite or huge components,
    /// or a collapsed elastic-pendulum spring.
    pub fn check_row(&self, row: &[f64]) -> Option<(usize, f64)> {
        for (i, &x) in row.iter().enumerate() {
            if !x.is_finite() || x.abs() > DIVERGENCE_BOUND {
                return Some((i, x));
            }
        }
        if let System::ElasticPendulum(_) = self {
            if !(row[1] > 0.0) {
                return Some((1, row[1]));
            }
        }
        None
    }

    /// Draws `count` initial states. Output depends only on `(self, count, seed)`.
    pub fn sample_initial(&self, count: usize, seed: u64) -> Result<StateBatch> {
        if count == 0 {
            return Err(Error::InvalidConfig("initial state count must be at least 1".into()));
        }
        let d = self.dim();
        let mut rng = SeedStream::new(seed, streams::INITIAL_STATES);
        let mut data = Vec::with_capacity(count * d);
        match self {
            System::SpringChain(_) => {
                for _ in 0..count * d {
                    data.push(rng.uniform(-2.5, 2.5));
                }
            }
            System::HenonHeiles(p) => {
                let (lo, hi) = HENON_HEILES_ENERGY_BAND;
                let budget = REJECTION_DRAWS_PER_ROW * count;
                let mut draws = 0;
                let mut accepted = 0;
                while accepted < count {
                    if draws == budget {
                        return Err(Error::RejectionBudgetExceeded { count, draws });
                    }
                    draws += 1;
                    let row = [
                        rng.uniform(-1.0, 1.0),
                        rng.uniform(-0.5, 1.0),
                        rng.uniform(-1.0, 1.0),
                        rng.uniform(-1.0, 1.0),
                    ];
                    let h = henon_heiles_energy(p.lambda, &row);
                    if (lo..=hi).contains(&h) {
                        data.extend_from_slice(&row);
                        accepted += 1;
                    }
                }
            }
            System::ElasticPendulum(p) => {
                for _ in 0..count {
                    data.extend_from_slice(&[rng.uniform(0.0, PI / 8.0), p.l0, 0.0, 0.0]);
                }
            }
            System::KLinkPendulum(p) if p.links == 1 => {
                for _ in 0..count {
                    data.push(rng.uniform(0.0, PI / 2.0));
                    data.push(rng.uniform(0.0, 0.5));
                }
            }
            System::KLinkPendulum(p) => {
                for _ in 0..count {
                    for _ in 0..p.links {
                        data.push(rng.uniform(0.0, PI / 8.0));
                    }
                    data.extend(std::iter::repeat_n(0.0, p.links));
                }
            }
        }
        StateBatch::from_vec(count, d, data)
    }
}

/// `H = (px^2 + py^2)/2 + (qx^2 + qy^2)/2 + lambda (qx^2 qy - qy^3/3)`.
pub fn henon_heiles_energy(lambda: f64, row: &[f64]) -> f64 {
    let (qx, qy, px, py) = (row[0], row[1], row[2], row[3]);
    0.5 * (px * px + py * py) + 0.5 * (qx * qx + qy * qy) + lambda * (qx * qx * qy - qy * qy * qy / 3.0)
}
