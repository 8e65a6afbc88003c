//! One module per verb. Each resolves its typed config from the layered
//! table, reads inputs through [`Run`], writes outputs and reports the
//! resolved config plus any threshold violations.

mod bench;
mod describe;
mod error_map;
mod evaluate;
mod generate;
mod simulate;
mod train;

use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use neurvec::container::sha256_hex;
use neurvec::datasets::TrajectoryDataset;
use neurvec::NeurVecModel;

use crate::config::Layers;
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

pub const DEFAULT_OUT_DIR: &str = "neurvec-out";

pub struct Outcome {
    pub resolved: Table,
    pub violations: Vec<String>,
}

impl Outcome {
    fn new<T: Serialize>(resolved: &T) -> Self {
        Self { resolved: crate::config::to_table(resolved), violations: Vec::new() }
    }

    /// Records a violation when `value` is above `limit`.
    fn at_most(&mut self, name: &str, value: f64, limit: Option<f64>) {
        if let Some(limit) = limit {
            if !(value <= limit) {
                self.violations.push(format!("{name} {value:e} exceeds {limit:e}"));
            }
        }
    }

    /// Records a violation when `value` is below `limit`.
    fn at_least(&mut self, name: &str, value: f64, limit: Option<f64>) {
        if let Some(limit) = limit {
            if !(value >= limit) {
                self.violations.push(format!("{name} {value:e} is below {limit:e}"));
            }
        }
    }
}

fn env_workers() -> CliResult<Option<usize>> {
    match std::env::var("NEURVEC_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::InvalidConfig(format!("NEURVEC_WORKERS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("NEURVEC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn run(verb: &str, mut layers: Layers, out: Option<PathBuf>) -> CliResult<()> {
    let workers = match env_workers()? {
        Some(w) => Some(w),
        None => match layers.table.get("workers") {
            None => None,
            Some(Value::Integer(w)) if *w > 0 => Some(*w as usize),
            Some(other) => {
                return Err(CliError::ConfigParse(format!("workers must be a positive integer, got {other}")))
            }
        },
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::InvalidConfig("worker count must be at least 1".into()));
        }
        layers.set("workers", Value::Integer(w as i64))?;
        // Fails only if the global pool already exists, which cannot happen
        // before the first verb runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let mut run = Run::new(verb, out_dir(out), rayon::current_num_threads(), layers.pinned_inputs.clone());
    let outcome = match verb {
        "generate" => generate::run(&mut run, &layers)?,
        "train" => train::run(&mut run, &layers)?,
        "simulate" => simulate::run(&mut run, &layers)?,
        "evaluate" => evaluate::run(&mut run, &layers)?,
        "bench" => bench::run(&mut run, &layers)?,
        "error-map" => error_map::run(&mut run, &layers)?,
        "describe" => describe::run(&mut run, &layers)?,
        other => return Err(CliError::Usage(format!("unknown verb {other}"))),
    };
    let out_dir = run.out_dir().to_path_buf();
    run.finish(layers.table, outcome.resolved)?;
    println!("manifest: {}", out_dir.join(crate::manifest::MANIFEST_FILE).display());
    if outcome.violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(outcome.violations.join("; ")))
    }
}

fn require<'a>(value: &'a Option<String>, key: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .map(Path::new)
        .ok_or_else(|| CliError::InvalidConfig(format!("`{key}` is required (flag --{key} or config key {key})")))
}

fn read_dataset(run: &mut Run, key: &str, path: &Path) -> CliResult<TrajectoryDataset> {
    let bytes = run.read_input(key, path)?;
    Ok(TrajectoryDataset::from_bytes(&bytes)?)
}

/// Reads a model and returns it with the SHA-256 of its file.
fn read_model(run: &mut Run, key: &str, path: &Path) -> CliResult<(NeurVecModel, String)> {
    let bytes = run.read_input(key, path)?;
    let model = NeurVecModel::from_bytes(&bytes)?;
    Ok((model, sha256_hex(&bytes)))
}

/// Header fields of a dataset file, as written to summaries and `describe`.
#[derive(Serialize)]
struct DatasetSummary {
    count: usize,
    samples: usize,
    d: usize,
    eta: f64,
    duration: f64,
    payload_checksum: String,
    sha256: String,
    config: neurvec::datasets::DatasetConfig,
}

impl DatasetSummary {
    fn new(ds: &TrajectoryDataset, bytes: &[u8]) -> Self {
        Self {
            count: ds.count(),
            samples: ds.samples(),
            d: ds.d,
            eta: ds.config.eta(),
            duration: ds.config.duration(),
            payload_checksum: format!("{:016x}", ds.checksum()),
            sha256: sha256_hex(bytes),
            config: ds.config.clone(),
        }
    }
}

fn seed_from(layers: &Layers) -> CliResult<Option<u64>> {
    match layers.table.get("seed") {
        None => Ok(None),
        Some(Value::Integer(s)) if *s >= 0 => Ok(Some(*s as u64)),
        Some(other) => Err(CliError::ConfigParse(format!("seed must be a non-negative integer, got {other}"))),
    }
}
