//! Fixed-step explicit schemes and the synchronous batch integration loops.
//!
//! A scheme produces the increment `S(f, u, dt)` only; the loops add it to
//! the state, together with the corrector output when one is supplied.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurvec::{ForwardScratch, NeurVecModel};
use crate::systems::{StateBatch, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    ImprovedEuler,
    Rk3,
    Rk4,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Euler, Scheme::ImprovedEuler, Scheme::Rk3, Scheme::Rk4];

    pub fn stages(self) -> usize {
        match self {
            Scheme::Euler => 1,
            Scheme::ImprovedEuler => 2,
            Scheme::Rk3 => 3,
            Scheme::Rk4 => 4,
        }
    }

    /// Global order of accuracy.
    pub fn order(self) -> u32 {
        self.stages() as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::ImprovedEuler => "improved-euler",
            Scheme::Rk3 => "rk3",
            Scheme::Rk4 => "rk4",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// Reusable stage buffers for one system/scheme pair.
pub struct Stepper<'a> {
    system: &'a System,
    scheme: Scheme,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    probe: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a System, scheme: Scheme) -> Self {
        Self { system, scheme, k1: vec![], k2: vec![], k3: vec![], k4: vec![], probe: vec![] }
    }

    fn resize(&mut self, len: usize) {
        for buf in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.probe] {
            buf.resize(len, 0.0);
        }
    }

    /// Writes `S(f, u, dt)` for every row of the flat buffer `u` into `out`.
    pub fn increment(&mut self, u: &[f64], dt: f64, out: &mut [f64]) -> Result<()> {
        self.resize(u.len());
        let f = self.system;
        match self.scheme {
            Scheme::Euler => {
                f.rhs_into(u, &mut self.k1)?;
                for (o, k1) in out.iter_mut().zip(&self.k1) {
                    *o = dt * k1;
                }
            }
            Scheme::ImprovedEuler => {
                f.rhs_into(u, &mut self.k1)?;
                for ((p, u), k1) in self.probe.iter_mut().zip(u).zip(&self.k1) {
                    *p = u + dt * k1;
                }
                f.rhs_into(&self.probe, &mut self.k2)?;
                for ((o, k1), k2) in out.iter_mut().zip(&self.k1).zip(&self.k2) {
                    *o = dt / 2.0 * (k1 + k2);
                }
            }
            Scheme::Rk3 => {
                f.rhs_into(u, &mut self.k1)?;
                for ((p, u), k1) in self.probe.iter_mut().zip(u).zip(&self.k1) {
                    *p = u + dt / 2.0 * k1;
                }
                f.rhs_into(&self.probe, &mut self.k2)?;
                for (((p, u), k1), k2) in self.probe.iter_mut().zip(u).zip(&self.k1).zip(&self.k2) {
                    *p = u - dt * k1 + 2.0 * dt * k2;
                }
                f.rhs_into(&self.probe, &mut self.k3)?;
                for (((o, k1), k2), k3) in out.iter_mut().zip(&self.k1).zip(&self.k2).zip(&self.k3) {
                    *o = dt * (k1 / 6.0 + 2.0 / 3.0 * k2 + k3 / 6.0);
                }
            }
            Scheme::Rk4 => {
                f.rhs_into(u, &mut self.k1)?;
                for ((p, u), k1) in self.probe.iter_mut().zip(u).zip(&self.k1) {
                    *p = u + dt / 2.0 * k1;
                }
                f.rhs_into(&self.probe, &mut self.k2)?;
                for ((p, u), k2) in self.probe.iter_mut().zip(u).zip(&self.k2) {
                    *p = u + dt / 2.0 * k2;
                }
                f.rhs_into(&self.probe, &mut self.k3)?;
                for ((p, u), k3) in self.probe.iter_mut().zip(u).zip(&self.k3) {
                    *p = u + dt * k3;
                }
                f.rhs_into(&self.probe, &mut self.k4)?;
                for ((((o, k1), k2), k3), k4) in
                    out.iter_mut().zip(&self.k1).zip(&self.k2).zip(&self.k3).zip(&self.k4)
                {
                    *o = dt * (k1 / 6.0 + k2 / 3.0 + k3 / 3.0 + k4 / 6.0);
                }
            }
        }
        Ok(())
    }
}

/// The increment `S(f, u, dt)` for every row of `states`.
pub fn step_increment(scheme: Scheme, system: &System, states: &StateBatch, dt: f64) -> Result<StateBatch> {
    if !(dt > 0.0) {
        return Err(Error::InvalidPlan(format!("step size must be positive, got {dt}")));
    }
    if states.d() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: states.d() });
    }
    let mut out = StateBatch::zeros(states.n(), states.d());
    Stepper::new(system, scheme).increment(states.as_slice(), dt, out.as_mut_slice())?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub dt: f64,
    pub n_steps: u64,
    pub sample_every: u64,
}

impl IntegrationPlan {
    pub fn new(dt: f64, n_steps: u64, sample_every: u64) -> Result<Self> {
        let plan = Self { dt, n_steps, sample_every };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan covering `n_samples` sampling intervals of `sample_every` steps each.
    pub fn sampled(dt: f64, sample_every: u64, n_samples: u64) -> Result<Self> {
        Self::new(dt, sample_every * n_samples, sample_every)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidPlan(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidPlan("sample_every must be at least 1".into()));
        }
        if self.n_steps % self.sample_every != 0 {
            return Err(Error::InvalidPlan(format!(
                "{} steps is not a multiple of the sampling stride {}",
                self.n_steps, self.sample_every
            )));
        }
        Ok(())
    }

    /// Sampling interval `eta`.
    pub fn eta(&self) -> f64 {
        self.sample_every as f64 * self.dt
    }

    /// Number of recorded samples, including `t = 0`.
    pub fn samples(&self) -> usize {
        (self.n_steps / self.sample_every) as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        let eta = self.eta();
        (0..self.samples()).map(|i| i as f64 * eta).collect()
    }
}

/// Sampled states of a batch, laid out `samples x n x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, sample: usize, row: usize) -> &[f64] {
        let off = (sample * self.n + row) * self.d;
        &self.states[off..off + self.d]
    }

    /// All rows at one sample index.
    pub fn snapshot(&self, sample: usize) -> StateBatch {
        let len = self.n * self.d;
        StateBatch::from_vec(self.n, self.d, self.states[sample * len..(sample + 1) * len].to_vec())
            .expect("snapshot shape")
    }

    /// Keeps the first `samples` samples.
    pub fn truncate(&mut self, samples: usize) {
        self.times.truncate(samples);
        self.states.truncate(samples * self.n * self.d);
    }

    /// Keeps rows `range`.
    pub fn select_rows(&self, range: std::ops::Range<usize>) -> Trajectory {
        let mut states = Vec::with_capacity(self.samples() * range.len() * self.d);
        for s in 0..self.samples() {
            let off = s * self.n * self.d;
            states.extend_from_slice(&self.states[off + range.start * self.d..off + range.end * self.d]);
        }
        Trajectory { times: self.times.clone(), n: range.len(), d: self.d, states }
    }

    /// Concatenates row blocks that share a time axis.
    pub fn concat_rows(parts: Vec<Trajectory>) -> Trajectory {
        let first = &parts[0];
        let times = first.times.clone();
        let d = first.d;
        let n: usize = parts.iter().map(|p| p.n).sum();
        let mut states = Vec::with_capacity(times.len() * n * d);
        for s in 0..times.len() {
            for p in &parts {
                states.extend_from_slice(&p.states[s * p.n * d..(s + 1) * p.n * d]);
            }
        }
        Trajectory { times, n, d, states }
    }
}

/// Advances `init` with `u <- u + S(f, u, dt)`.
pub fn integrate(scheme: Scheme, system: &System, init: &StateBatch, plan: &IntegrationPlan) -> Result<Trajectory> {
    run(scheme, system, None, init, plan)
}

/// Advances `init` with `u <- u + S(f, u, dt) + NeurVec(u)`.
///
/// The model must have been trained for this system and scheme with a coarse
/// step equal to `plan.dt`.
pub fn integrate_with_corrector(
    scheme: Scheme,
    system: &System,
    model: &NeurVecModel,
    init: &StateBatch,
    plan: &IntegrationPlan,
) -> Result<Trajectory> {
    model.check_compatible(system, scheme, plan.dt)?;
    run(scheme, system, Some(model), init, plan)
}

/// Same as [`integrate`] / [`integrate_with_corrector`] with the batch split
/// into `partitions` contiguous row blocks integrated on the rayon pool.
/// Rows never interact, so the result is identical to the serial run.
pub fn integrate_partitioned(
    scheme: Scheme,
    system: &System,
    model: Option<&NeurVecModel>,
    init: &StateBatch,
    plan: &IntegrationPlan,
    partitions: usize,
) -> Result<Trajectory> {
    if let Some(model) = model {
        model.check_compatible(system, scheme, plan.dt)?;
    }
    let ranges = partition_rows(init.n(), partitions);
    let results: Vec<Result<Trajectory>> = ranges
        .par_iter()
        .map(|r| {
            run(scheme, system, model, &init.select_rows(r.clone()), plan).map_err(|e| match e {
                Error::Divergence { step, row, component, value } => {
                    Error::Divergence { step, row: row + r.start, component, value }
                }
                other => other,
            })
        })
        .collect();
    let mut parts = Vec::with_capacity(results.len());
    let mut first_err: Option<Error> = None;
    for res in results {
        match res {
            Ok(t) => parts.push(t),
            Err(e) => {
                let earlier = match (&first_err, &e) {
                    (None, _) => true,
                    (Some(Error::Divergence { step: a, .. }), Error::Divergence { step: b, .. }) => b < a,
                    _ => false,
                };
                if earlier {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(Trajectory::concat_rows(parts)),
    }
}

/// Splits `0..n` into `parts` contiguous ranges whose sizes differ by at most one.
pub fn partition_rows(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.clamp(1, n.max(1));
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn run(
    scheme: Scheme,
    system: &System,
    model: Option<&NeurVecModel>,
    init: &StateBatch,
    plan: &IntegrationPlan,
) -> Result<Trajectory> {
    plan.validate()?;
    let d = system.dim();
    if init.d() != d {
        return Err(Error::DimensionMismatch { expected: d, found: init.d() });
    }
    check_rows(system, init.as_slice(), d, 0)?;
    let n = init.n();
    let mut states = Vec::with_capacity(plan.samples() * n * d);
    states.extend_from_slice(init.as_slice());

    let mut u = init.as_slice().to_vec();
    let mut inc = vec![0.0; u.len()];
    let mut corr = vec![0.0; if model.is_some() { u.len() } else { 0 }];
    let mut stepper = Stepper::new(system, scheme);
    let mut scratch = ForwardScratch::default();
    for step in 1..=plan.n_steps {
        stepper.increment(&u, plan.dt, &mut inc)?;
        match model {
            Some(m) => {
                m.forward_into(&u, &mut corr, &mut scratch);
                for ((u, s), c) in u.iter_mut().zip(&inc).zip(&corr) {
                    *u = *u + s + c;
                }
            }
            None => {
                for (u, s) in u.iter_mut().zip(&inc) {
                    *u += s;
                }
            }
        }
        check_rows(system, &u, d, step)?;
        if step % plan.sample_every == 0 {
            states.extend_from_slice(&u);
        }
    }
    Ok(Trajectory { times: plan.times(), n, d, states })
}

fn check_rows(system: &System, u: &[f64], d: usize, step: u64) -> Result<()> {
    for (row, r) in u.chunks_exact(d).enumerate() {
        if let Some((component, value)) = system.check_row(r) {
            return Err(Error::Divergence { step, row, component, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::SpringChainParams;

    // du/dt = u embedded as a one-mass chain is awkward; use the harmonic
    // oscillator q' = p, p' = -q (unit mass, two half-stiffness springs).
    fn oscillator() -> System {
        System::SpringChain(SpringChainParams { masses: vec![1.0], stiffness: vec![0.5, 0.5] })
    }

    #[test]
    fn scheme_increments_on_oscillator() {
        let s = oscillator();
        let u = StateBatch::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let euler = step_increment(Scheme::Euler, &s, &u, 0.1).unwrap();
        assert_eq!(euler.as_slice(), &[0.0, -0.1]);
        // Heun: probe (1, -0.1), f(probe) = (-0.1, -1)
        let heun = step_increment(Scheme::ImprovedEuler, &s, &u, 0.1).unwrap();
        assert!((heun.as_slice()[0] - 0.05 * -0.1).abs() < 1e-16);
        assert!((heun.as_slice()[1] - 0.05 * -2.0).abs() < 1e-16);
        let rk4 = step_increment(Scheme::Rk4, &s, &u, 0.1).unwrap();
        let (c, sn) = (0.1f64.cos(), 0.1f64.sin());
        assert!((1.0 + rk4.as_slice()[0] - c).abs() < 1e-7);
        assert!((rk4.as_slice()[1] + sn).abs() < 1e-7);
    }

    #[test]
    fn zero_steps_keeps_only_initial_state() {
        let s = oscillator();
        let u = StateBatch::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let plan = IntegrationPlan::new(0.1, 0, 1).unwrap();
        for scheme in Scheme::ALL {
            let t = integrate(scheme, &s, &u, &plan).unwrap();
            assert_eq!(t.times, vec![0.0]);
            assert_eq!(t.states, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(IntegrationPlan::new(0.0, 10, 1).is_err());
        assert!(IntegrationPlan::new(0.1, 10, 0).is_err());
        assert!(IntegrationPlan::new(0.1, 10, 3).is_err());
        assert_eq!(IntegrationPlan::new(0.1, 10, 5).unwrap().samples(), 3);
    }

    #[test]
    fn divergence_names_the_step() {
        let s = System::SpringChain(SpringChainParams { masses: vec![1.0], stiffness: vec![1e6, 1e6] });
        let u = StateBatch::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let plan = IntegrationPlan::new(1.0, 100, 1).unwrap();
        match integrate(Scheme::Euler, &s, &u, &plan) {
            Err(Error::Divergence { step, row: 0, .. }) => assert!(step > 0 && step < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn partitions_cover_rows() {
        let r = partition_rows(10, 3);
        assert_eq!(r, vec![0..4, 4..7, 7..10]);
        assert_eq!(partition_rows(2, 5).len(), 2);
    }
}
