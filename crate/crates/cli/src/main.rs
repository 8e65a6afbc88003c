//! `neurvec`: dataset generation, corrector training, simulation, evaluation,
//! timing and error maps, one verb per process.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use config::Layers;
use failure::{code, CliError, CliResult, EXIT_CODE_HELP};

#[derive(Parser, Debug)]
#[command(name = "neurvec", version, about = "Coarse-step ODE integration with a learned error corrector")]
#[command(after_help = EXIT_CODE_HELP)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Sample initial states and integrate them into a dataset file.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Dataset preset, e.g. elastic-pendulum-train.
        #[arg(long)]
        preset: Option<String>,
        /// Multiplier on the preset trajectory count.
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a corrector to the residuals of a coarse step on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Recipe supplying scheme and k, e.g. fig5-elastic.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-integrate a dataset's initial states, optionally with a corrector.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare a prediction dataset against a reference dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        prediction: Option<PathBuf>,
        /// MSE curve of prediction against reference.
        #[arg(long)]
        mse: bool,
        /// Energy error curves.
        #[arg(long)]
        energy: bool,
        /// Time-series histograms of one state component.
        #[arg(long)]
        histogram: bool,
        /// Fail when the time-averaged mean MSE exceeds this.
        #[arg(long)]
        max_mse: Option<f64>,
        /// Fail when the time-averaged mean energy error exceeds this.
        #[arg(long)]
        max_energy_error: Option<f64>,
    },
    /// Time bare and corrected integrations and test the differences.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Corrector models; repeat for several. Without explicit cases each
        /// model gets a bare and a corrected case plus one fine-step case.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long)]
        trials: Option<u64>,
        /// Seconds to sleep between runs.
        #[arg(long)]
        pause: Option<f64>,
        /// Fail when any corrector overhead exceeds this.
        #[arg(long)]
        max_epsilon: Option<f64>,
        /// Fail when the baseline-over-corrected speedup is below this.
        #[arg(long)]
        min_speedup: Option<f64>,
    },
    /// Leading-error recovery map for a one-link Euler corrector.
    ErrorMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Fail when the median corrected-minus-leading-term error exceeds this.
        #[arg(long)]
        max_median_r_diff: Option<f64>,
        /// Fail when median R_Diff / median R_EL exceeds this.
        #[arg(long)]
        max_diff_ratio: Option<f64>,
    },
    /// Print the header, counts and checksums of a dataset or model file.
    Describe {
        #[command(flatten)]
        common: Common,
        input: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file, or a manifest.toml from an earlier run to replay it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set train.epochs=50. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory [env: NEURVEC_OUT_DIR].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn flag<T: Into<Value>>(layers: &mut Layers, key: &str, value: Option<T>) -> CliResult<()> {
    match value {
        Some(v) => layers.set(key, v.into()),
        None => Ok(()),
    }
}

fn path_flag(layers: &mut Layers, key: &str, value: Option<PathBuf>) -> CliResult<()> {
    flag(layers, key, value.map(|p| p.display().to_string()))
}

fn seed_value(seed: u64) -> CliResult<Value> {
    i64::try_from(seed).map(Value::Integer).map_err(|_| CliError::Usage(format!("seed {seed} exceeds i64::MAX")))
}

fn layers_for(common: &Common, verb: &str) -> CliResult<Layers> {
    let mut layers = Layers::load(common.config.as_deref(), verb)?;
    layers.apply_sets(&common.sets)?;
    Ok(layers)
}

fn dispatch(verb: Verb) -> CliResult<()> {
    match verb {
        Verb::Generate { common, preset, scale, seed } => {
            let mut layers = layers_for(&common, "generate")?;
            flag(&mut layers, "preset", preset)?;
            flag(&mut layers, "scale", scale)?;
            if let Some(seed) = seed {
                layers.set("seed", seed_value(seed)?)?;
                layers.set("dataset.seed", seed_value(seed)?)?;
            }
            commands::run("generate", layers, common.out)
        }
        Verb::Train { common, preset, dataset, seed } => {
            let mut layers = layers_for(&common, "train")?;
            flag(&mut layers, "preset", preset)?;
            path_flag(&mut layers, "dataset", dataset)?;
            if let Some(seed) = seed {
                layers.set("seed", seed_value(seed)?)?;
            }
            commands::run("train", layers, common.out)
        }
        Verb::Simulate { common, dataset, model } => {
            let mut layers = layers_for(&common, "simulate")?;
            path_flag(&mut layers, "dataset", dataset)?;
            path_flag(&mut layers, "model", model)?;
            commands::run("simulate", layers, common.out)
        }
        Verb::Evaluate { common, reference, prediction, mse, energy, histogram, max_mse, max_energy_error } => {
            let mut layers = layers_for(&common, "evaluate")?;
            path_flag(&mut layers, "reference", reference)?;
            path_flag(&mut layers, "prediction", prediction)?;
            let metrics: Vec<Value> = [(mse, "mse"), (energy, "energy"), (histogram, "histogram")]
                .into_iter()
                .filter(|(on, _)| *on)
                .map(|(_, name)| Value::String(name.into()))
                .collect();
            if !metrics.is_empty() {
                layers.set("metrics", Value::Array(metrics))?;
            }
            flag(&mut layers, "thresholds.max_mse", max_mse)?;
            flag(&mut layers, "thresholds.max_energy_error", max_energy_error)?;
            commands::run("evaluate", layers, common.out)
        }
        Verb::Bench { common, dataset, models, trials, pause, max_epsilon, min_speedup } => {
            let mut layers = layers_for(&common, "bench")?;
            path_flag(&mut layers, "dataset", dataset)?;
            if !models.is_empty() {
                let list = models.iter().map(|p| Value::String(p.display().to_string())).collect();
                layers.set("models", Value::Array(list))?;
            }
            if let Some(trials) = trials {
                layers.set("trials", seed_value(trials)?)?;
            }
            flag(&mut layers, "pause_seconds", pause)?;
            flag(&mut layers, "thresholds.max_epsilon", max_epsilon)?;
            flag(&mut layers, "thresholds.min_speedup", min_speedup)?;
            commands::run("bench", layers, common.out)
        }
        Verb::ErrorMap { common, model, max_median_r_diff, max_diff_ratio } => {
            let mut layers = layers_for(&common, "error-map")?;
            path_flag(&mut layers, "model", model)?;
            flag(&mut layers, "thresholds.max_median_r_diff", max_median_r_diff)?;
            flag(&mut layers, "thresholds.max_diff_ratio", max_diff_ratio)?;
            commands::run("error-map", layers, common.out)
        }
        Verb::Describe { common, input } => {
            let mut layers = layers_for(&common, "describe")?;
            path_flag(&mut layers, "input", input)?;
            commands::run("describe", layers, common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { code::OK });
        }
    };
    match dispatch(cli.verb) {
        Ok(()) => ExitCode::from(code::OK),
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {message}", e.category());
            ExitCode::from(e.code())
        }
    }
}
