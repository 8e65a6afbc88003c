use serde::{Deserialize, Serialize};

use neurvec::container::sha256_hex;
use neurvec::datasets::{TrajectoryDataset, DATASET_MAGIC};
use neurvec::neurvec::{ModelMeta, MODEL_MAGIC};
use neurvec::NeurVecModel;

use super::{require, DatasetSummary, Outcome};
use crate::config::{typed, Layers};
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescribeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    input: Option<String>,
}

#[derive(Serialize)]
struct ModelSummary {
    d: usize,
    width: usize,
    parameters: usize,
    coarse_dt: f64,
    sha256: String,
    meta: ModelMeta,
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
enum Description {
    Dataset(DatasetSummary),
    Model(ModelSummary),
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let config: DescribeConfig = typed(layers.table.clone())?;
    let path = require(&config.input, "input")?;
    let bytes = run.read_input("input", path)?;
    let description = match bytes.get(..4) {
        Some(m) if m == DATASET_MAGIC => {
            let ds = TrajectoryDataset::from_bytes(&bytes)?;
            Description::Dataset(DatasetSummary::new(&ds, &bytes))
        }
        Some(m) if m == MODEL_MAGIC => {
            let model = NeurVecModel::from_bytes(&bytes)?;
            Description::Model(ModelSummary {
                d: model.d(),
                width: model.width(),
                parameters: model.parameter_count(),
                coarse_dt: model.meta.coarse_dt(),
                sha256: sha256_hex(&bytes),
                meta: model.meta,
            })
        }
        _ => {
            return Err(CliError::Integrity(format!(
                "{}: neither a dataset (NVDS) nor a model (NVEC) file",
                path.display()
            )))
        }
    };
    let text = toml::to_string(&description).expect("descriptions serialize to TOML");
    print!("{text}");
    run.write("describe.toml", text.as_bytes())?;
    Ok(Outcome::new(&config))
}
