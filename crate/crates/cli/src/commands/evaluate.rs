use serde::{Deserialize, Serialize};

use neurvec::evaluation::{energy_error_curve, mse_curve, padded_range, time_series_histogram, MseCurve};
use neurvec::Trajectory;

use super::{read_dataset, require, Outcome};
use crate::config::{typed, Layers};
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Metric {
    Mse,
    Energy,
    Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HistogramSpec {
    /// State component to bin.
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    variable: Option<String>,
    /// Fractional padding of the reference range on each side.
    pad: f64,
    /// Explicit value range; overrides the padded reference range.
    #[serde(skip_serializing_if = "Option::is_none")]
    range: Option<(f64, f64)>,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { index: 0, variable: None, pad: 0.05, range: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thresholds {
    #[serde(skip_serializing_if = "Option::is_none")]
    max_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_energy_error: Option<f64>,
}

/// `evaluate` schema.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prediction: Option<String>,
    /// Defaults to `mse` with a prediction and `energy` without.
    #[serde(default)]
    metrics: Vec<Metric>,
    #[serde(default)]
    histogram: HistogramSpec,
    #[serde(default)]
    thresholds: Thresholds,
}

#[derive(Serialize)]
struct CurveSummary {
    time_average: f64,
    max_mean: f64,
    final_mean: f64,
}

impl CurveSummary {
    fn new(c: &MseCurve) -> Self {
        Self {
            time_average: c.time_average(),
            max_mean: c.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            final_mean: c.mean.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Serialize)]
struct HistogramSummary {
    variable: String,
    index: usize,
    lo: f64,
    hi: f64,
    t_start: f64,
    t_end: f64,
    reference_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction_total: Option<u64>,
}

#[derive(Default, Serialize)]
struct EvaluationSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<CurveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_reference: Option<CurveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_prediction: Option<CurveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    histogram: Option<HistogramSummary>,
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let mut config: EvaluateConfig = typed(layers.table.clone())?;
    let reference_set = read_dataset(run, "reference", require(&config.reference, "reference")?)?;
    let system = reference_set.config.system.clone();
    let reference = reference_set.to_trajectory();
    drop(reference_set);
    let prediction: Option<Trajectory> = match &config.prediction {
        Some(p) => Some(read_dataset(run, "prediction", std::path::Path::new(p))?.to_trajectory()),
        None => None,
    };
    if config.metrics.is_empty() {
        config.metrics = vec![if prediction.is_some() { Metric::Mse } else { Metric::Energy }];
    }
    config.metrics.dedup();

    let mut summary = EvaluationSummary::default();
    let mut outcome_checks: Vec<(&str, f64, Option<f64>)> = Vec::new();
    for metric in config.metrics.clone() {
        match metric {
            Metric::Mse => {
                let pred = prediction
                    .as_ref()
                    .ok_or_else(|| CliError::InvalidConfig("the mse metric needs a prediction".into()))?;
                let curve = mse_curve(pred, &reference)?;
                run.write("mse.tsv", curve.to_table().render().as_bytes())?;
                let s = CurveSummary::new(&curve);
                println!("mse: time-averaged {:e}, max {:e}", s.time_average, s.max_mean);
                outcome_checks.push(("time-averaged MSE", s.time_average, config.thresholds.max_mse));
                summary.mse = Some(s);
            }
            Metric::Energy => {
                let curve = energy_error_curve(&reference, &system)?;
                run.write("energy_reference.tsv", curve.to_table().render().as_bytes())?;
                summary.energy_reference = Some(CurveSummary::new(&curve));
                let target = match &prediction {
                    Some(pred) => {
                        let curve = energy_error_curve(pred, &system)?;
                        run.write("energy_prediction.tsv", curve.to_table().render().as_bytes())?;
                        summary.energy_prediction = Some(CurveSummary::new(&curve));
                        summary.energy_prediction.as_ref()
                    }
                    None => summary.energy_reference.as_ref(),
                };
                let avg = target.map(|s| s.time_average).unwrap_or(f64::NAN);
                println!("energy error: time-averaged {avg:e}");
                outcome_checks.push(("time-averaged energy error", avg, config.thresholds.max_energy_error));
            }
            Metric::Histogram => {
                let spec = &config.histogram;
                let range = match spec.range {
                    Some(r) => r,
                    None => padded_range(&reference, spec.index, spec.pad)?,
                };
                let variable = spec.variable.clone().unwrap_or_else(|| format!("u{}", spec.index));
                let href = time_series_histogram(&reference, spec.index, &variable, range)?;
                run.write("histogram_reference.tsv", href.to_table().render().as_bytes())?;
                let prediction_total = match &prediction {
                    Some(pred) => {
                        let hp = time_series_histogram(pred, spec.index, &variable, range)?;
                        run.write("histogram_prediction.tsv", hp.to_table().render().as_bytes())?;
                        Some(hp.total())
                    }
                    None => None,
                };
                summary.histogram = Some(HistogramSummary {
                    variable,
                    index: spec.index,
                    lo: href.lo,
                    hi: href.hi,
                    t_start: href.t_start,
                    t_end: href.t_end,
                    reference_total: href.total(),
                    prediction_total,
                });
                config.histogram.range = Some(range);
            }
        }
    }
    run.write_toml("evaluation.toml", &summary)?;
    let mut outcome = Outcome::new(&config);
    for (name, value, limit) in outcome_checks {
        outcome.at_most(name, value, limit);
    }
    Ok(outcome)
}
