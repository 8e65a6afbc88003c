//! Named dataset configurations and figure recipes.
//!
//! Dataset presets keep the reference step, sampling interval, duration and
//! initial-state distribution; only the trajectory count is scaled.

use crate::datasets::{DatasetConfig, Role};
use crate::error::{Error, Result};
use crate::solvers::Scheme;
use crate::systems::System;

/// Default multiplier on reference trajectory counts.
pub const DEFAULT_SCALE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SystemKind {
    SpringChain,
    HenonHeiles,
    ElasticPendulum,
    KLink(usize),
}

impl SystemKind {
    pub fn system(self) -> System {
        match self {
            SystemKind::SpringChain => System::spring_chain(),
            SystemKind::HenonHeiles => System::henon_heiles(),
            SystemKind::ElasticPendulum => System::elastic_pendulum(),
            SystemKind::KLink(k) => System::k_link(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub system: SystemKind,
    pub role: Role,
    /// Reference trajectory count before scaling.
    pub count: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub eta: f64,
    pub duration: f64,
}

impl DatasetPreset {
    /// `max(1, round(count * scale))` trajectories.
    pub fn scaled_count(&self, scale: f64) -> usize {
        ((self.count as f64 * scale).round() as usize).max(1)
    }

    pub fn config(&self, scale: f64, seed: u64) -> Result<DatasetConfig> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
        }
        DatasetConfig::from_times(
            self.system.system(),
            self.role,
            self.scaled_count(scale),
            self.scheme,
            self.dt,
            self.eta,
            self.duration,
            seed,
        )
    }
}

const fn row(
    name: &'static str,
    system: SystemKind,
    role: Role,
    count: usize,
    scheme: Scheme,
    dt: f64,
    eta: f64,
    duration: f64,
) -> DatasetPreset {
    DatasetPreset { name, system, role, count, scheme, dt, eta, duration }
}

use Role::{Test, Train};
use SystemKind::*;

pub const DATASETS: &[DatasetPreset] = &[
    row("spring-chain-euler-train", SpringChain, Train, 60_000, Scheme::Euler, 1e-3, 0.2, 20.0),
    row("spring-chain-improved-euler-train", SpringChain, Train, 60_000, Scheme::ImprovedEuler, 1e-3, 0.2, 20.0),
    row("spring-chain-rk3-train", SpringChain, Train, 60_000, Scheme::Rk3, 1e-3, 0.2, 20.0),
    row("spring-chain-rk4-train", SpringChain, Train, 60_000, Scheme::Rk4, 1e-3, 0.2, 20.0),
    row("spring-chain-test", SpringChain, Test, 10_500, Scheme::Rk4, 1e-4, 0.2, 20.0),
    row("one-link-train", KLink(1), Train, 1_000, Scheme::Rk4, 1e-3, 0.1, 10.0),
    row("two-link-train", KLink(2), Train, 300_000, Scheme::Rk4, 1e-3, 0.1, 10.0),
    row("two-link-test", KLink(2), Test, 7_000, Scheme::Rk4, 1e-4, 0.1, 10.0),
    row("henon-heiles-train", HenonHeiles, Train, 100_000, Scheme::Rk4, 1e-3, 0.5, 50.0),
    row("henon-heiles-test", HenonHeiles, Test, 70_000, Scheme::Rk4, 1e-4, 0.5, 50.0),
    row("elastic-pendulum-train", ElasticPendulum, Train, 300_000, Scheme::Rk4, 1e-3, 0.1, 50.0),
    row("elastic-pendulum-test", ElasticPendulum, Test, 14_000, Scheme::Rk4, 1e-4, 0.1, 50.0),
];

pub fn dataset(name: &str) -> Result<&'static DatasetPreset> {
    DATASETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = DATASETS.iter().map(|p| p.name).collect();
        Error::InvalidConfig(format!("unknown dataset preset {name:?}; known: {}", names.join(", ")))
    })
}

/// Train/test pairing plus the corrected scheme and coarse-step ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recipe {
    pub name: &'static str,
    pub train: &'static str,
    pub test: Option<&'static str>,
    pub scheme: Scheme,
    pub k: u64,
}

pub const RECIPES: &[Recipe] = &[
    Recipe { name: "fig2-euler", train: "spring-chain-euler-train", test: Some("spring-chain-test"), scheme: Scheme::Euler, k: 200 },
    Recipe {
        name: "fig2-improved-euler",
        train: "spring-chain-improved-euler-train",
        test: Some("spring-chain-test"),
        scheme: Scheme::ImprovedEuler,
        k: 200,
    },
    Recipe { name: "fig2-rk3", train: "spring-chain-rk3-train", test: Some("spring-chain-test"), scheme: Scheme::Rk3, k: 200 },
    Recipe { name: "fig2-rk4", train: "spring-chain-rk4-train", test: Some("spring-chain-test"), scheme: Scheme::Rk4, k: 200 },
    Recipe { name: "fig4-hh", train: "henon-heiles-train", test: Some("henon-heiles-test"), scheme: Scheme::Rk4, k: 500 },
    Recipe {
        name: "fig5-elastic",
        train: "elastic-pendulum-train",
        test: Some("elastic-pendulum-test"),
        scheme: Scheme::Rk4,
        k: 100,
    },
    Recipe { name: "fig5-2link", train: "two-link-train", test: Some("two-link-test"), scheme: Scheme::Rk4, k: 100 },
    Recipe { name: "fig7-errormap", train: "one-link-train", test: None, scheme: Scheme::Euler, k: 100 },
];

pub fn recipe(name: &str) -> Result<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name).ok_or_else(|| {
        let names: Vec<&str> = RECIPES.iter().map(|r| r.name).collect();
        Error::InvalidConfig(format!("unknown recipe {name:?}; known: {}", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_an_exact_config() {
        for p in DATASETS {
            let c = p.config(DEFAULT_SCALE, 0).unwrap();
            assert_eq!(c.dt, p.dt);
            assert!((c.eta() - p.eta).abs() < 1e-12, "{}", p.name);
            assert!((c.duration() - p.duration).abs() < 1e-9, "{}", p.name);
            assert_eq!(c.system.dim(), p.system.system().dim());
        }
    }

    #[test]
    fn scaling_only_changes_count() {
        let p = dataset("elastic-pendulum-train").unwrap();
        assert_eq!(p.config(0.01, 1).unwrap().count, 3_000);
        assert_eq!(p.config(1.0 / 3000.0, 1).unwrap().count, 100);
        assert_eq!(p.config(1e-9, 1).unwrap().count, 1);
        assert_eq!(p.config(1e-3, 1).unwrap().samples(), 501);
        assert!(p.config(0.0, 1).is_err());
    }

    #[test]
    fn recipes_match_their_datasets() {
        for r in RECIPES {
            let train = dataset(r.train).unwrap();
            assert!((train.eta - r.k as f64 * train.dt).abs() < 1e-12, "{}", r.name);
            if let Some(test) = r.test {
                let test = dataset(test).unwrap();
                assert_eq!(test.system, train.system);
                assert_eq!(test.eta, train.eta);
            }
        }
        assert!(recipe("fig9").is_err());
        assert!(dataset("nope").is_err());
    }
}
