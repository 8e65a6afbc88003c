use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use neurvec::datasets::{self, DatasetConfig};
use neurvec::presets;

use super::{seed_from, DatasetSummary, Outcome};
use crate::config::{deep_merge, to_table, typed, Layers};
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

/// `generate` schema. A preset fills `dataset`; explicit keys override it.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    dataset: DatasetConfig,
}

fn expand(layers: &Layers) -> CliResult<Table> {
    let seed = seed_from(layers)?;
    let mut base = Table::new();
    if let Some(name) = layers.get_str("preset") {
        let scale = layers.get_float("scale").unwrap_or(presets::DEFAULT_SCALE);
        let config = presets::dataset(name)?.config(scale, seed.unwrap_or(0))?;
        base.insert("dataset".into(), Value::Table(to_table(&config)));
    } else if layers.table.contains_key("scale") {
        return Err(CliError::InvalidConfig("scale only applies together with a preset".into()));
    }
    if let Some(seed) = seed {
        let mut seed_only = Table::new();
        seed_only.insert("seed".into(), Value::Integer(seed as i64));
        let mut wrap = Table::new();
        wrap.insert("dataset".into(), Value::Table(seed_only));
        deep_merge(&mut base, &wrap);
    }
    deep_merge(&mut base, &layers.table);
    Ok(base)
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let config: GenerateConfig = typed(expand(layers)?)?;
    let dataset = datasets::generate(&config.dataset)?;
    let bytes = dataset.to_bytes();
    run.write("dataset.nvds", &bytes)?;
    let summary = DatasetSummary::new(&dataset, &bytes);
    println!(
        "generated {} trajectories x {} samples of {} (sha256 {})",
        summary.count,
        summary.samples,
        dataset.config.system.id().name(),
        summary.sha256
    );
    run.write_toml("dataset.toml", &summary)?;
    Ok(Outcome::new(&config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layers(text: &str) -> Layers {
        Layers { table: text.parse().unwrap(), ..Layers::default() }
    }

    #[test]
    fn preset_expands_and_explicit_keys_win() {
        let l = layers("preset = \"elastic-pendulum-train\"\nscale = 0.001\nseed = 7\n[dataset]\nintervals = 3\n");
        let config: GenerateConfig = typed(expand(&l).unwrap()).unwrap();
        let preset = presets::dataset("elastic-pendulum-train").unwrap().config(0.001, 7).unwrap();
        assert_eq!(config.dataset.count, preset.count);
        assert_eq!(config.dataset.seed, 7);
        assert_eq!(config.dataset.intervals, 3);
        assert_eq!(config.dataset.dt, preset.dt);
    }

    #[test]
    fn resolved_config_reexpands_to_itself() {
        let l = layers("preset = \"henon-heiles-test\"\nscale = 0.01\nseed = 2\n");
        let first: GenerateConfig = typed(expand(&l).unwrap()).unwrap();
        let again: GenerateConfig = typed(expand(&layers(&toml::to_string(&first).unwrap())).unwrap()).unwrap();
        assert_eq!(first.dataset, again.dataset);
    }

    #[test]
    fn unknown_keys_and_stray_scale_are_rejected() {
        let bad = layers("preset = \"elastic-pendulum-train\"\n[dataset]\ncuont = 3\n");
        assert!(matches!(typed::<GenerateConfig>(expand(&bad).unwrap()), Err(CliError::ConfigParse(_))));
        assert!(matches!(expand(&layers("scale = 0.5\n")), Err(CliError::InvalidConfig(_))));
        assert!(matches!(expand(&layers("seed = -1\n")), Err(CliError::ConfigParse(_))));
    }
}
