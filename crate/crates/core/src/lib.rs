//! Batched fixed-step ODE integration with a learned per-step corrector.
//!
//! A coarse step `k·dt` of an explicit scheme is augmented with a small
//! network trained on the residual between fine-step data and the coarse
//! increment, so that `u + S(f, u, k·dt) + NeurVec(u)` tracks the fine-step
//! solution at a fraction of the cost.
//!
//! Modules map onto the pipeline:
//! - [`systems`]: benchmark ODEs, initial-condition samplers, energies
//! - [`solvers`]: Euler, improved Euler, RK3, RK4 and the batch loops
//! - [`neurvec`]: the corrector network, gradients, Adam and training
//! - [`datasets`]: trajectory generation and the `NVDS` file format
//! - [`evaluation`]: MSE and energy curves, histograms, error maps, timing
//!   and t-tests
//! - [`presets`]: named recipes for each benchmark setting

pub mod container;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod neurvec;
pub mod presets;
pub mod rng;
pub mod solvers;
pub mod systems;

pub use error::{Error, Result};
pub use neurvec::{NeurVecModel, TrainConfig};
pub use solvers::{IntegrationPlan, Scheme, Trajectory};
pub use systems::{StateBatch, System, SystemId};
