use serde::{Deserialize, Serialize};

use neurvec::evaluation::{error_map, GridSpec};
use neurvec::System;

use super::{read_model, require, Outcome};
use crate::config::{typed, Layers};
use crate::failure::CliResult;
use crate::manifest::Run;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thresholds {
    #[serde(skip_serializing_if = "Option::is_none")]
    max_median_r_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_diff_ratio: Option<f64>,
}

/// `error-map` schema. The system defaults to the standard one-link pendulum.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorMapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default = "one_link")]
    system: System,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    thresholds: Thresholds,
}

fn one_link() -> System {
    System::k_link(1)
}

#[derive(Serialize)]
struct ErrorMapSummary {
    dt: f64,
    nodes: usize,
    median_r_el: f64,
    median_r_nv: f64,
    median_r_diff: f64,
    diff_ratio: f64,
    grid: GridSpec,
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let config: ErrorMapConfig = typed(layers.table.clone())?;
    let (model, _) = read_model(run, "model", require(&config.model, "model")?)?;
    let field = error_map(&model, &config.system, &config.grid)?;
    run.write("error_map.tsv", field.to_table().render().as_bytes())?;
    let summary = ErrorMapSummary {
        dt: field.dt,
        nodes: field.nodes.len(),
        median_r_el: field.median_r_el(),
        median_r_nv: field.median_r_nv(),
        median_r_diff: field.median_r_diff(),
        diff_ratio: field.median_r_diff() / field.median_r_el(),
        grid: config.grid,
    };
    println!(
        "median R_EL {:e}, R_NV {:e}, R_Diff {:e} (ratio {:.4})",
        summary.median_r_el, summary.median_r_nv, summary.median_r_diff, summary.diff_ratio
    );
    run.write_toml("error_map.toml", &summary)?;
    let mut outcome = Outcome::new(&config);
    outcome.at_most("median R_Diff", summary.median_r_diff, config.thresholds.max_median_r_diff);
    outcome.at_most("median R_Diff / median R_EL", summary.diff_ratio, config.thresholds.max_diff_ratio);
    Ok(outcome)
}
