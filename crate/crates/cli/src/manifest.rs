use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Table;

use neurvec::container::sha256_hex;
use neurvec::datasets::DATASET_FORMAT_VERSION;
use neurvec::neurvec::MODEL_FORMAT_VERSION;

use crate::failure::{CliError, CliResult};

pub const MANIFEST_FORMAT: &str = "neurvec-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Formats {
    pub dataset: u32,
    pub model: u32,
}

/// Audit record of one run. `config` is the merged user configuration
/// (file, `--set` and flags) and `resolved` the same after preset expansion
/// and defaults. Passing the manifest back as `--config` repeats the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub manifest_version: u32,
    pub tool_version: String,
    pub verb: String,
    pub workers: usize,
    pub formats: Formats,
    #[serde(default)]
    pub inputs: BTreeMap<String, FileRecord>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    pub config: Table,
    pub resolved: Table,
}

/// Output directory plus the bookkeeping that ends up in the manifest.
pub struct Run {
    verb: String,
    out_dir: PathBuf,
    workers: usize,
    pinned: BTreeMap<String, String>,
    inputs: BTreeMap<String, FileRecord>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn new(verb: &str, out_dir: PathBuf, workers: usize, pinned: BTreeMap<String, String>) -> Self {
        Self { verb: verb.into(), out_dir, workers, pinned, inputs: BTreeMap::new(), outputs: BTreeMap::new() }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Reads an input file and records its checksum under `key`. When the run
    /// replays a manifest, the checksum must match the recorded one.
    pub fn read_input(&mut self, key: &str, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let sha256 = sha256_hex(&bytes);
        if let Some(expected) = self.pinned.get(key) {
            if *expected != sha256 {
                return Err(CliError::Integrity(format!(
                    "input {key} ({}) has sha256 {sha256}, the manifest recorded {expected}",
                    path.display()
                )));
            }
        }
        self.inputs.insert(key.into(), FileRecord { path: path.display().to_string(), sha256 });
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(name.into(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_toml<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = toml::to_string(value).expect("summaries serialize to TOML");
        self.write(name, text.as_bytes())
    }

    pub fn finish(mut self, config: Table, resolved: Table) -> CliResult<()> {
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            verb: std::mem::take(&mut self.verb),
            workers: self.workers,
            formats: Formats { dataset: DATASET_FORMAT_VERSION, model: MODEL_FORMAT_VERSION },
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            config,
            resolved,
        };
        let text = toml::to_string(&manifest).expect("manifest serializes to TOML");
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.out_dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.bin");
        std::fs::write(&input, b"abc").unwrap();
        let mut run = Run::new("train", dir.path().join("out"), 3, BTreeMap::new());
        run.read_input("dataset", &input).unwrap();
        run.write("a.tsv", b"x\n1\n").unwrap();
        let config: Table = "seed = 4\n[train]\nepochs = 2\n".parse().unwrap();
        run.finish(config.clone(), config.clone()).unwrap();

        let text = std::fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap();
        let m: Manifest = toml::from_str(&text).unwrap();
        assert_eq!(m.verb, "train");
        assert_eq!(m.workers, 3);
        assert_eq!(m.config, config);
        assert_eq!(m.inputs["dataset"].sha256, sha256_hex(b"abc"));
        assert_eq!(m.outputs["a.tsv"], sha256_hex(b"x\n1\n"));
    }

    #[test]
    fn changed_pinned_input_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.bin");
        std::fs::write(&input, b"abc").unwrap();
        let pinned = BTreeMap::from([("dataset".to_string(), sha256_hex(b"abd"))]);
        let mut run = Run::new("train", dir.path().to_path_buf(), 1, pinned);
        assert!(matches!(run.read_input("dataset", &input), Err(CliError::Integrity(_))));
    }
}
