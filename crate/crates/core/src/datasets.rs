//! Trajectory datasets: generation, persistence and trajectory-level splits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::neurvec::NeurVecModel;
use crate::rng::{streams, SeedStream};
use crate::solvers::{integrate_partitioned, IntegrationPlan, Scheme, Trajectory};
use crate::systems::{StateBatch, System};

pub const DATASET_MAGIC: &[u8; 4] = b"NVDS";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Train,
    Test,
}

/// Provenance of a dataset produced by [`split`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub fraction: f64,
    pub seed: u64,
    /// 0 for the `fraction` side, 1 for the remainder.
    pub part: u8,
    pub parent_count: usize,
}

/// Everything needed to regenerate a dataset.
///
/// Step counts are integers: the sampling interval is `steps_per_sample * dt`
/// and the duration is `intervals` sampling intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub system: System,
    pub role: Role,
    pub count: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub steps_per_sample: u64,
    pub intervals: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitInfo>,
    /// SHA-256 of the corrector model file for simulated (not generated) data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrector: Option<String>,
}

impl DatasetConfig {
    /// Builds a config from a step `dt`, sampling interval `eta` and duration,
    /// requiring `eta / dt` and `duration / eta` to be integers.
    #[allow(clippy::too_many_arguments)]
    pub fn from_times(
        system: System,
        role: Role,
        count: usize,
        scheme: Scheme,
        dt: f64,
        eta: f64,
        duration: f64,
        seed: u64,
    ) -> Result<Self> {
        let steps_per_sample = exact_ratio(eta, dt, "sampling interval", "step")?;
        let intervals = exact_ratio(duration, eta, "duration", "sampling interval")?;
        let cfg = Self {
            system,
            role,
            count,
            scheme,
            dt,
            steps_per_sample,
            intervals,
            seed,
            split: None,
            corrector: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.count == 0 {
            return Err(Error::InvalidConfig("dataset count must be at least 1".into()));
        }
        if self.steps_per_sample == 0 {
            return Err(Error::InvalidConfig("steps_per_sample must be at least 1".into()));
        }
        self.plan().map(|_| ())
    }

    pub fn eta(&self) -> f64 {
        self.steps_per_sample as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.intervals as f64 * self.eta()
    }

    pub fn samples(&self) -> usize {
        self.intervals as usize + 1
    }

    pub fn plan(&self) -> Result<IntegrationPlan> {
        IntegrationPlan::sampled(self.dt, self.steps_per_sample, self.intervals)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("dataset config serializes")
    }
}

fn exact_ratio(num: f64, den: f64, num_name: &str, den_name: &str) -> Result<u64> {
    if !(num > 0.0 && den > 0.0) {
        return Err(Error::InvalidConfig(format!("{num_name} and {den_name} must be positive")));
    }
    let ratio = (num / den).round();
    if ratio < 1.0 || (ratio * den - num).abs() > 1e-9 * num {
        return Err(Error::InvalidConfig(format!(
            "{num_name} {num} is not an integer multiple of {den_name} {den}"
        )));
    }
    Ok(ratio as u64)
}

/// Sampled trajectories laid out `count x samples x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub config: DatasetConfig,
    pub d: usize,
    pub states: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    count: usize,
    samples: usize,
    d: usize,
    config: DatasetConfig,
}

impl TrajectoryDataset {
    pub fn count(&self) -> usize {
        self.config.count
    }

    pub fn samples(&self) -> usize {
        self.config.samples()
    }

    /// Sample times `index * eta`.
    pub fn times(&self) -> Vec<f64> {
        let eta = self.config.eta();
        (0..self.samples()).map(|i| i as f64 * eta).collect()
    }

    /// One trajectory, `samples x d`.
    pub fn trajectory(&self, i: usize) -> &[f64] {
        let len = self.samples() * self.d;
        &self.states[i * len..(i + 1) * len]
    }

    pub fn initial_states(&self) -> StateBatch {
        let mut data = Vec::with_capacity(self.count() * self.d);
        for i in 0..self.count() {
            data.extend_from_slice(&self.trajectory(i)[..self.d]);
        }
        StateBatch::from_vec(self.count(), self.d, data).expect("initial state shape")
    }

    /// Converts from the solver's `samples x n x d` layout.
    pub fn from_trajectory(config: DatasetConfig, traj: &Trajectory) -> Result<Self> {
        if traj.n != config.count || traj.samples() != config.samples() {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} rows and {} samples, config expects {} and {}",
                traj.n,
                traj.samples(),
                config.count,
                config.samples()
            )));
        }
        let (n, s, d) = (traj.n, traj.samples(), traj.d);
        let mut states = vec![0.0; n * s * d];
        for sample in 0..s {
            for row in 0..n {
                let dst = (row * s + sample) * d;
                states[dst..dst + d].copy_from_slice(traj.state(sample, row));
            }
        }
        Ok(Self { config, d, states })
    }

    /// Converts to the solver's `samples x n x d` layout.
    pub fn to_trajectory(&self) -> Trajectory {
        let (n, s, d) = (self.count(), self.samples(), self.d);
        let mut states = vec![0.0; n * s * d];
        for row in 0..n {
            for sample in 0..s {
                let src = (row * s + sample) * d;
                let dst = (sample * n + row) * d;
                states[dst..dst + d].copy_from_slice(&self.states[src..src + d]);
            }
        }
        Trajectory { times: self.times(), n, d, states }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = DatasetHeader {
            count: self.count(),
            samples: self.samples(),
            d: self.d,
            config: self.config.clone(),
        };
        let meta = toml::to_string(&header).expect("dataset header serializes");
        container::encode(DATASET_MAGIC, DATASET_FORMAT_VERSION, &meta, &self.states)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = container::decode(bytes, DATASET_MAGIC, DATASET_FORMAT_VERSION)?;
        let header: DatasetHeader = toml::from_str(&c.meta).map_err(|e| Error::Metadata(e.to_string()))?;
        if header.count != header.config.count
            || header.samples != header.config.samples()
            || header.d != header.config.system.dim()
            || c.payload.len() != header.count * header.samples * header.d
        {
            return Err(Error::Metadata("dataset header disagrees with payload".into()));
        }
        Ok(Self { config: header.config, d: header.d, states: c.payload })
    }

    /// Payload checksum as stored in the file trailer.
    pub fn checksum(&self) -> u64 {
        let bytes = self.to_bytes();
        u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"))
    }
}

/// Samples initial states from `config.seed` and integrates them with
/// `(config.scheme, config.dt)`, recording every `steps_per_sample` steps.
/// Trajectories are split across the rayon pool; the result does not depend
/// on the thread count.
pub fn generate(config: &DatasetConfig) -> Result<TrajectoryDataset> {
    if config.corrector.is_some() {
        return Err(Error::InvalidConfig("corrected runs are produced by simulate, not generate".into()));
    }
    config.validate()?;
    let init = config.system.sample_initial(config.count, config.seed)?;
    let workers = rayon::current_num_threads();
    let traj = integrate_partitioned(config.scheme, &config.system, None, &init, &config.plan()?, workers)?;
    TrajectoryDataset::from_trajectory(config.clone(), &traj)
}

/// Re-integrates the initial states of `source` with a different scheme,
/// step and optional corrector. The result keeps `source`'s provenance with
/// the integration fields replaced.
pub fn simulate(
    source: &TrajectoryDataset,
    scheme: Scheme,
    dt: f64,
    steps_per_sample: u64,
    intervals: u64,
    model: Option<(&NeurVecModel, String)>,
) -> Result<TrajectoryDataset> {
    let mut config = source.config.clone();
    config.scheme = scheme;
    config.dt = dt;
    config.steps_per_sample = steps_per_sample;
    config.intervals = intervals;
    config.corrector = model.as_ref().map(|(_, sum)| sum.clone());
    config.validate()?;
    let init = source.initial_states();
    let plan = config.plan()?;
    let workers = rayon::current_num_threads();
    let traj = integrate_partitioned(scheme, &config.system, model.map(|(m, _)| m), &init, &plan, workers)?;
    TrajectoryDataset::from_trajectory(config, &traj)
}

pub fn save(dataset: &TrajectoryDataset, path: &Path) -> Result<()> {
    container::write_file(path, &dataset.to_bytes())
}

pub fn load(path: &Path) -> Result<TrajectoryDataset> {
    TrajectoryDataset::from_bytes(&container::read_file(path)?)
}

/// Trajectory-level split: a seeded shuffle of trajectory indices, with
/// `round(fraction * count)` trajectories on the first side. Each side keeps
/// its trajectories in original order.
pub fn split(dataset: &TrajectoryDataset, fraction: f64, seed: u64) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = dataset.count();
    let left = (fraction * n as f64).round() as usize;
    if left == 0 || left == n {
        return Err(Error::EmptySplit { left, right: n - left });
    }
    let (a, b) = split_indices(n, fraction, seed);
    let part = |idx: &[usize], part: u8| {
        let mut config = dataset.config.clone();
        config.count = idx.len();
        config.split = Some(SplitInfo { fraction, seed, part, parent_count: n });
        let mut states = Vec::with_capacity(idx.len() * dataset.samples() * dataset.d);
        for &i in idx {
            states.extend_from_slice(dataset.trajectory(i));
        }
        TrajectoryDataset { config, d: dataset.d, states }
    };
    Ok((part(&a, 0), part(&b, 1)))
}

/// Indices of the trajectories assigned to each side by [`split`].
pub fn split_indices(count: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let left = (fraction * count as f64).round() as usize;
    let mut order: Vec<usize> = (0..count).collect();
    SeedStream::new(seed, streams::SPLIT).shuffle(&mut order);
    let (a, b) = order.split_at(left.min(count));
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(count: usize) -> DatasetConfig {
        DatasetConfig::from_times(System::elastic_pendulum(), Role::Train, count, Scheme::Rk4, 1e-2, 0.1, 0.5, 3)
            .unwrap()
    }

    #[test]
    fn single_interval_gives_two_samples() {
        let cfg =
            DatasetConfig::from_times(System::henon_heiles(), Role::Test, 1, Scheme::Rk4, 1e-2, 0.5, 0.5, 1).unwrap();
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.samples(), 2);
        assert_eq!(ds.times(), vec![0.0, 0.5]);
    }

    #[test]
    fn non_integer_ratios_are_rejected() {
        let e = DatasetConfig::from_times(System::henon_heiles(), Role::Test, 1, Scheme::Rk4, 0.3, 0.5, 1.0, 1);
        assert!(matches!(e, Err(Error::InvalidConfig(_))));
        let e = DatasetConfig::from_times(System::henon_heiles(), Role::Test, 1, Scheme::Rk4, 0.1, 0.5, 1.2, 1);
        assert!(matches!(e, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn layout_round_trips_through_trajectory() {
        let ds = generate(&small_config(3)).unwrap();
        let t = ds.to_trajectory();
        let back = TrajectoryDataset::from_trajectory(ds.config.clone(), &t).unwrap();
        assert_eq!(back, ds);
        assert_eq!(ds.initial_states().row(1), t.state(0, 1));
    }

    #[test]
    fn split_sizes_and_union() {
        let ds = generate(&small_config(10)).unwrap();
        let (a, b) = split(&ds, 0.5, 1).unwrap();
        assert_eq!((a.count(), b.count()), (5, 5));
        let (ia, ib) = split_indices(10, 0.5, 1);
        let mut all: Vec<usize> = ia.iter().chain(&ib).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for (k, &i) in ia.iter().enumerate() {
            assert_eq!(a.trajectory(k), ds.trajectory(i));
        }
        let (a2, _) = split(&ds, 0.5, 1).unwrap();
        assert_eq!(a, a2);
        assert!(matches!(split(&ds, 0.01, 1), Err(Error::EmptySplit { .. })));
        assert!(split(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn header_round_trips() {
        let ds = generate(&small_config(2)).unwrap();
        let back = TrajectoryDataset::from_bytes(&ds.to_bytes()).unwrap();
        assert_eq!(back, ds);
    }
}
