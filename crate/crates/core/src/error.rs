use std::path::PathBuf;

use thiserror::Error;

use crate::systems::SystemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("K-link mass matrix is singular (pivot {pivot:e} below 1e-12)")]
    SingularMassMatrix { pivot: f64 },

    #[error("energy is not implemented for {0:?}")]
    UnsupportedSystem(SystemId),

    #[error("rejection sampling drew {draws} candidates without filling {count} rows")]
    RejectionBudgetExceeded { count: usize, draws: usize },

    #[error("state diverged at step {step} (trajectory {row}, component {component}, value {value:e})")]
    Divergence { step: u64, row: usize, component: usize, value: f64 },

    #[error("invalid integration plan: {0}")]
    InvalidPlan(String),

    #[error("model was built for {expected}, used with {found}")]
    ModelSystemMismatch { expected: String, found: String },

    #[error("model trained for coarse step {expected}, asked to integrate with {found}")]
    StepSizeMismatch { expected: f64, found: f64 },

    #[error("sampling interval {eta} does not equal k * dt = {coarse}")]
    SamplingMismatch { eta: f64, coarse: f64 },

    #[error("non-finite training loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("format version mismatch: file has version {found}, this build reads version {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("file is truncated")]
    TruncatedFile,

    #[error("malformed metadata block: {0}")]
    Metadata(String),

    #[error("split would leave one side empty ({left} / {right})")]
    EmptySplit { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("time axes differ")]
    TimeAxisMismatch,

    #[error("histogram value range is empty or non-finite: [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("both samples are constant and equal; t statistic is undefined")]
    DegenerateVariance,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
