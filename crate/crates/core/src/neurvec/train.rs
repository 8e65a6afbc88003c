//! Residual training pairs and the mini-batch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{adam_step, Adam, AdamConfig, ModelMeta, NeurVecModel, DEFAULT_WIDTH};
use crate::datasets::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::rng::{streams, SeedStream};
use crate::solvers::{Scheme, Stepper};
use crate::systems::System;

/// Inputs `u_kn` and residual targets `u_k(n+1) - u_kn - S(f, u_kn, k dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPairs {
    pub d: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// Setting the residuals were computed for; `seed` is filled in by [`train`].
    pub meta: ModelMeta,
}

impl TrainingPairs {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Keeps the pairs at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> TrainingPairs {
        let d = self.d;
        let mut inputs = Vec::with_capacity(indices.len() * d);
        let mut targets = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            inputs.extend_from_slice(&self.inputs[i * d..(i + 1) * d]);
            targets.extend_from_slice(&self.targets[i * d..(i + 1) * d]);
        }
        TrainingPairs { d, inputs, targets, meta: self.meta.clone() }
    }
}

/// One pair per consecutive sample pair of every trajectory. The dataset's
/// sampling interval must equal the coarse step `k * dt`.
pub fn build_training_pairs(
    dataset: &TrajectoryDataset,
    scheme: Scheme,
    system: &System,
    k: u64,
) -> Result<TrainingPairs> {
    if dataset.config.system.id() != system.id() || dataset.d != system.dim() {
        return Err(Error::ModelSystemMismatch {
            expected: dataset.config.system.id().to_string(),
            found: system.id().to_string(),
        });
    }
    let eta = dataset.config.eta();
    let coarse = k as f64 * dataset.config.dt;
    if k == 0 || (eta - coarse).abs() > 1e-12 * eta {
        return Err(Error::SamplingMismatch { eta, coarse });
    }
    let d = dataset.d;
    let samples = dataset.samples();
    let per_traj = samples.saturating_sub(1);
    let g = dataset.count() * per_traj;
    let mut inputs = Vec::with_capacity(g * d);
    let mut next = Vec::with_capacity(g * d);
    for i in 0..dataset.count() {
        let traj = dataset.trajectory(i);
        inputs.extend_from_slice(&traj[..per_traj * d]);
        next.extend_from_slice(&traj[d..]);
    }
    let mut increment = vec![0.0; inputs.len()];
    Stepper::new(system, scheme).increment(&inputs, coarse, &mut increment)?;
    let targets = next
        .iter()
        .zip(&inputs)
        .zip(&increment)
        .map(|((next, u), s)| next - u - s)
        .collect();
    Ok(TrainingPairs {
        d,
        inputs,
        targets,
        meta: ModelMeta { system: system.id(), scheme, k, fine_dt: dataset.config.dt, eta, seed: 0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from `lr` to zero over all optimizer steps.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetScaling {
    /// Fit the raw residual.
    Raw,
    /// Fit `residual / (k dt)`; the output layer is rescaled after training
    /// so the returned model still predicts the raw residual.
    StepNormalized,
    /// Fit the residual divided by its per-component root mean square; the
    /// output rows are rescaled after training in the same way.
    RmsNormalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub width: usize,
    pub adam: AdamConfig,
    pub schedule: LrSchedule,
    pub targets: TargetScaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 1024,
            width: DEFAULT_WIDTH,
            adam: AdamConfig::default(),
            schedule: LrSchedule::Constant,
            targets: TargetScaling::Raw,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub pairs: usize,
    pub optimizer_steps: u64,
    /// Sample-weighted mean mini-batch loss of each epoch, in training units.
    pub epoch_losses: Vec<f64>,
    /// Full-data loss of the returned model on raw residuals.
    pub final_loss: f64,
    pub wall_seconds: f64,
}

/// Per-component divisor applied to the targets during training.
fn output_scales(pairs: &TrainingPairs, scaling: TargetScaling, coarse_dt: f64) -> Vec<f64> {
    let d = pairs.d;
    match scaling {
        TargetScaling::Raw => vec![1.0; d],
        TargetScaling::StepNormalized => vec![coarse_dt; d],
        TargetScaling::RmsNormalized => {
            let mut sq = vec![0.0; d];
            for t in pairs.targets.chunks_exact(d) {
                for (s, v) in sq.iter_mut().zip(t) {
                    *s += v * v;
                }
            }
            let g = pairs.len() as f64;
            sq.iter().map(|s| if *s > 0.0 { (s / g).sqrt() } else { 1.0 }).collect()
        }
    }
}

/// Trains a fresh model on `pairs`. Initialization and shuffling derive from
/// `seed` alone, so equal inputs give a bitwise-equal model.
pub fn train(pairs: &TrainingPairs, config: &TrainConfig, seed: u64) -> Result<(NeurVecModel, TrainingReport)> {
    let started = Instant::now();
    let d = pairs.d;
    let g = pairs.len();
    if config.batch_size == 0 || config.width == 0 {
        return Err(Error::InvalidConfig("batch size and width must be positive".into()));
    }
    if g < config.batch_size {
        return Err(Error::InvalidConfig(format!(
            "{g} training pairs is fewer than the batch size {}",
            config.batch_size
        )));
    }
    let mut meta = pairs.meta.clone();
    meta.seed = seed;
    let mut model = NeurVecModel::init(d, config.width, meta, seed);
    let scales = output_scales(pairs, config.targets, model.meta.coarse_dt());
    let scaled;
    let targets: &[f64] = if scales.iter().all(|&s| s == 1.0) {
        &pairs.targets
    } else {
        scaled = pairs.targets.chunks_exact(d).flat_map(|t| t.iter().zip(&scales).map(|(v, s)| v / s)).collect::<Vec<_>>();
        &scaled
    };

    let mut adam = Adam::for_model(config.adam, &model);
    let mut shuffler = SeedStream::new(seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..g).collect();
    let batches_per_epoch = g.div_ceil(config.batch_size);
    let total_steps = (config.epochs * batches_per_epoch) as f64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch_in = Vec::with_capacity(config.batch_size * d);
    let mut batch_tg = Vec::with_capacity(config.batch_size * d);

    for epoch in 0..config.epochs {
        shuffler.shuffle(&mut order);
        let mut epoch_sse = 0.0;
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            batch_in.clear();
            batch_tg.clear();
            for &i in idx {
                batch_in.extend_from_slice(&pairs.inputs[i * d..(i + 1) * d]);
                batch_tg.extend_from_slice(&targets[i * d..(i + 1) * d]);
            }
            let (loss, grads) = model.loss_and_grads(&batch_in, &batch_tg)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            epoch_sse += loss * idx.len() as f64;
            if config.schedule == LrSchedule::Cosine {
                let t = adam.t as f64;
                adam.lr = config.adam.lr * 0.5 * (1.0 + (std::f64::consts::PI * t / total_steps).cos());
            }
            adam_step(&mut model, &mut adam, &grads);
        }
        epoch_losses.push(epoch_sse / g as f64);
    }
    for (mut row, s) in model.wa.rows_mut().into_iter().zip(&scales) {
        row.mapv_inplace(|w| w * s);
    }
    if !model.all_finite() {
        return Err(Error::NonFiniteLoss { epoch: config.epochs, step: 0 });
    }
    let final_loss = model.loss(&pairs.inputs, &pairs.targets)?;
    let report = TrainingReport {
        config: config.clone(),
        seed,
        pairs: g,
        optimizer_steps: adam.t,
        epoch_losses,
        final_loss,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}
