use serde::{Deserialize, Serialize};

use neurvec::datasets;
use neurvec::Scheme;

use super::{read_dataset, read_model, require, DatasetSummary, Outcome};
use crate::config::{typed, Layers};
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

/// `simulate` schema. Unset integration fields default to the model's coarse
/// step (or the source dataset's step) over the source's duration.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(default)]
    scheme: Option<Scheme>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    steps_per_sample: Option<u64>,
    #[serde(default)]
    intervals: Option<u64>,
}

/// Nearest integer to `num / den` when it is one to 1e-9 relative.
fn whole_ratio(num: f64, den: f64) -> Option<u64> {
    let r = (num / den).round();
    (r >= 1.0 && (r * den - num).abs() <= 1e-9 * num.abs()).then_some(r as u64)
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let mut config: SimulateConfig = typed(layers.table.clone())?;
    let source = read_dataset(run, "dataset", require(&config.dataset, "dataset")?)?;
    let model = match &config.model {
        Some(path) => Some(read_model(run, "model", std::path::Path::new(path))?),
        None => None,
    };

    let scheme = config.scheme.or(model.as_ref().map(|(m, _)| m.meta.scheme)).unwrap_or(source.config.scheme);
    let dt = config.dt.or(model.as_ref().map(|(m, _)| m.meta.coarse_dt())).unwrap_or(source.config.dt);
    let steps_per_sample = match config.steps_per_sample {
        Some(s) => s,
        None => whole_ratio(source.config.eta(), dt).unwrap_or(1),
    };
    let intervals = match config.intervals {
        Some(n) => n,
        None => whole_ratio(source.config.duration(), dt * steps_per_sample as f64).ok_or_else(|| {
            CliError::InvalidConfig(format!(
                "source duration {} is not a whole number of sampling intervals {}; set `intervals`",
                source.config.duration(),
                dt * steps_per_sample as f64
            ))
        })?,
    };
    config.scheme = Some(scheme);
    config.dt = Some(dt);
    config.steps_per_sample = Some(steps_per_sample);
    config.intervals = Some(intervals);

    let corrector = model.as_ref().map(|(m, sum)| (m, sum.clone()));
    let simulated = datasets::simulate(&source, scheme, dt, steps_per_sample, intervals, corrector)?;
    let bytes = simulated.to_bytes();
    run.write("simulated.nvds", &bytes)?;
    let summary = DatasetSummary::new(&simulated, &bytes);
    println!(
        "simulated {} trajectories with {}{} at dt {dt:e} for {} steps",
        summary.count,
        scheme.name(),
        if model.is_some() { " + corrector" } else { "" },
        steps_per_sample * intervals
    );
    run.write_toml("simulated.toml", &summary)?;
    Ok(Outcome::new(&config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_ratio_accepts_rounding_noise_only() {
        assert_eq!(whole_ratio(0.1, 1e-3), Some(100));
        assert_eq!(whole_ratio(8.5, 0.1), Some(85));
        assert_eq!(whole_ratio(0.15, 0.1), None);
        assert_eq!(whole_ratio(0.05, 0.1), None);
    }
}
