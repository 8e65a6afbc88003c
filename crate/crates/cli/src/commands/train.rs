use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use neurvec::evaluation::Table as Tsv;
use neurvec::neurvec::{build_training_pairs, train, ModelMeta, TrainingReport};
use neurvec::presets;
use neurvec::{Scheme, TrainConfig};

use super::{read_dataset, require, Outcome};
use crate::config::{deep_merge, typed, Layers};
use crate::failure::CliResult;
use crate::manifest::Run;

/// `train` schema. A recipe preset supplies `scheme` and `k`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    dataset: Option<String>,
    scheme: Scheme,
    k: u64,
    #[serde(default)]
    train: TrainConfig,
}

#[derive(Serialize)]
struct TrainSummary {
    d: usize,
    width: usize,
    parameters: usize,
    coarse_dt: f64,
    model_sha256: String,
    meta: ModelMeta,
    report: TrainingReport,
}

fn expand(layers: &Layers) -> CliResult<Table> {
    let mut base = Table::new();
    if let Some(name) = layers.get_str("preset") {
        let recipe = presets::recipe(name)?;
        base.insert("scheme".into(), Value::String(recipe.scheme.name().into()));
        base.insert("k".into(), Value::Integer(recipe.k as i64));
    }
    deep_merge(&mut base, &layers.table);
    Ok(base)
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let config: TrainRunConfig = typed(expand(layers)?)?;
    let dataset = read_dataset(run, "dataset", require(&config.dataset, "dataset")?)?;
    let pairs = build_training_pairs(&dataset, config.scheme, &dataset.config.system, config.k)?;
    drop(dataset);
    eprintln!(
        "training on {} pairs: {} epochs, batch {}, width {}",
        pairs.len(),
        config.train.epochs,
        config.train.batch_size,
        config.train.width
    );
    let (model, report) = train(&pairs, &config.train, config.seed)?;
    let bytes = model.to_bytes();
    run.write("model.nvec", &bytes)?;

    let mut losses = Tsv::new(&["epoch", "loss"]);
    for (i, l) in report.epoch_losses.iter().enumerate() {
        losses.push(vec![(i + 1) as f64, *l]);
    }
    run.write("training.tsv", losses.render().as_bytes())?;
    let summary = TrainSummary {
        d: model.d(),
        width: model.width(),
        parameters: model.parameter_count(),
        coarse_dt: model.meta.coarse_dt(),
        model_sha256: neurvec::container::sha256_hex(&bytes),
        meta: model.meta.clone(),
        report,
    };
    println!(
        "trained {} corrector for {} at coarse step {:e}: final loss {:e}",
        summary.meta.system.name(),
        summary.meta.scheme.name(),
        summary.coarse_dt,
        summary.report.final_loss
    );
    run.write_toml("training.toml", &summary)?;
    Ok(Outcome::new(&config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_supplies_scheme_and_k() {
        let l = Layers { table: "preset = \"fig5-elastic\"\n[train]\nepochs = 4\n".parse().unwrap(), ..Layers::default() };
        let c: TrainRunConfig = typed(expand(&l).unwrap()).unwrap();
        assert_eq!(c.scheme, Scheme::Rk4);
        assert_eq!(c.k, 100);
        assert_eq!(c.train.epochs, 4);
        assert_eq!(c.train.width, TrainConfig::default().width);
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            let l = Layers { table: format!("scheme = \"{}\"\nk = 2\n", s.name()).parse().unwrap(), ..Layers::default() };
            let c: TrainRunConfig = typed(expand(&l).unwrap()).unwrap();
            assert_eq!(c.scheme, s);
        }
    }
}
