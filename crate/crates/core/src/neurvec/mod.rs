//! The learned corrector: a one-hidden-layer network with a trainable
//! rational activation, its exact gradients, Adam, and the training loop.
//!
//! The network maps a state `u` to `Wa · σ(W1 u + b1)`. The output layer has
//! no bias, so a model whose `Wa` is zero contributes exactly nothing to a
//! corrected step.

mod adam;
mod io;
mod kernel;
mod rational;
mod train;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, SeedStream};
use crate::solvers::Scheme;
use crate::systems::{System, SystemId};

pub use adam::{adam_step, Adam, AdamConfig};
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use kernel::{ForwardScratch, Grads};
pub use rational::RationalCoeffs;
pub use train::{build_training_pairs, train, LrSchedule, TargetScaling, TrainConfig, TrainingPairs, TrainingReport};

/// Hidden width of the reference network.
pub const DEFAULT_WIDTH: usize = 1024;

/// What a model was trained for. Using it outside this setting is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub system: SystemId,
    pub scheme: Scheme,
    /// Ratio of the coarse step to the fine (data) step.
    pub k: u64,
    /// Step used to generate the training data.
    pub fine_dt: f64,
    /// Sampling interval of the training data.
    pub eta: f64,
    pub seed: u64,
}

impl ModelMeta {
    pub fn coarse_dt(&self) -> f64 {
        self.k as f64 * self.fine_dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeurVecModel {
    /// `width x d`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `d x width`
    pub wa: Array2<f64>,
    pub rational: RationalCoeffs,
    pub meta: ModelMeta,
}

impl NeurVecModel {
    /// Uniform initialization: `W1, b1 ~ U[-1/sqrt(d), 1/sqrt(d)]`,
    /// `Wa ~ U[-1/sqrt(width), 1/sqrt(width)]`, reference rational coefficients.
    pub fn init(d: usize, width: usize, meta: ModelMeta, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed, streams::WEIGHT_INIT);
        let in_bound = 1.0 / (d as f64).sqrt();
        let out_bound = 1.0 / (width as f64).sqrt();
        let w1 = Array2::from_shape_simple_fn((width, d), || rng.uniform(-in_bound, in_bound));
        let b1 = Array1::from_shape_simple_fn(width, || rng.uniform(-in_bound, in_bound));
        let wa = Array2::from_shape_simple_fn((d, width), || rng.uniform(-out_bound, out_bound));
        Self { w1, b1, wa, rational: RationalCoeffs::default(), meta }
    }

    /// All weights zero; the output is identically zero.
    pub fn zeros(d: usize, width: usize, meta: ModelMeta) -> Self {
        Self {
            w1: Array2::zeros((width, d)),
            b1: Array1::zeros(width),
            wa: Array2::zeros((d, width)),
            rational: RationalCoeffs::default(),
            meta,
        }
    }

    pub fn d(&self) -> usize {
        self.w1.ncols()
    }

    pub fn width(&self) -> usize {
        self.w1.nrows()
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.wa.len() + 7
    }

    /// Trainable tensors in canonical order: W1, b1, Wa, a, b.
    pub fn params(&self) -> [&[f64]; 5] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.wa.as_slice().expect("standard layout"),
            &self.rational.a,
            &self.rational.b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.wa.as_slice_mut().expect("standard layout"),
            &mut self.rational.a,
            &mut self.rational.b,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Verifies that this model may correct `scheme` on `system` at step `dt`.
    pub fn check_compatible(&self, system: &System, scheme: Scheme, dt: f64) -> Result<()> {
        if self.meta.system != system.id() || self.d() != system.dim() {
            return Err(Error::ModelSystemMismatch {
                expected: format!("{} (d = {})", self.meta.system, self.d()),
                found: format!("{} (d = {})", system.id(), system.dim()),
            });
        }
        if self.meta.scheme != scheme {
            return Err(Error::ModelSystemMismatch {
                expected: format!("scheme {}", self.meta.scheme),
                found: format!("scheme {scheme}"),
            });
        }
        let coarse = self.meta.coarse_dt();
        if (dt - coarse).abs() > 1e-12 * coarse.abs() {
            return Err(Error::StepSizeMismatch { expected: coarse, found: dt });
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn test_meta(system: SystemId, scheme: Scheme) -> ModelMeta {
    ModelMeta { system, scheme, k: 100, fine_dt: 1e-3, eta: 0.1, seed: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_respects_bounds_and_seed() {
        let meta = test_meta(SystemId::SpringChain, Scheme::Euler);
        let m = NeurVecModel::init(40, 1024, meta.clone(), 1);
        let inb = 1.0 / 40f64.sqrt();
        assert!(m.w1.iter().chain(m.b1.iter()).all(|v| v.abs() <= inb));
        assert!(m.wa.iter().all(|v| v.abs() <= 1.0 / 32.0));
        assert_eq!(m.rational, RationalCoeffs::default());
        assert_eq!(m.parameter_count(), 2 * 40 * 1024 + 1024 + 7);
        assert_eq!(m, NeurVecModel::init(40, 1024, meta.clone(), 1));
        assert_ne!(m, NeurVecModel::init(40, 1024, meta, 2));
    }

    #[test]
    fn compatibility_checks() {
        let m = NeurVecModel::zeros(2, 4, test_meta(SystemId::KLinkPendulum, Scheme::Euler));
        let sys = System::k_link(1);
        assert!(m.check_compatible(&sys, Scheme::Euler, 0.1).is_ok());
        assert!(matches!(m.check_compatible(&sys, Scheme::Rk4, 0.1), Err(Error::ModelSystemMismatch { .. })));
        assert!(matches!(m.check_compatible(&sys, Scheme::Euler, 0.2), Err(Error::StepSizeMismatch { .. })));
        assert!(m.check_compatible(&System::k_link(2), Scheme::Euler, 0.1).is_err());
        assert!(m.check_compatible(&System::elastic_pendulum(), Scheme::Euler, 0.1).is_err());
    }
}
