use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use neurvec::evaluation::{benchmark, t_tests, BenchCase, BenchOptions, BenchReport, TTestResult};
use neurvec::{IntegrationPlan, NeurVecModel, Scheme};

use super::{read_dataset, read_model, require, Outcome};
use crate::config::{typed, Layers};
use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseSpec {
    label: String,
    scheme: Scheme,
    dt: f64,
    steps: u64,
    /// Index into `models`; absent for a bare integration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thresholds {
    #[serde(skip_serializing_if = "Option::is_none")]
    max_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_speedup: Option<f64>,
}

/// `bench` schema. Without explicit `cases`, the first model defines a
/// fine-step baseline of `steps * k` steps and every model gets a bare and a
/// corrected case of `steps` coarse steps.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    dataset: Option<String>,
    /// Use only the first `rows` initial states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default)]
    models: Vec<String>,
    #[serde(default = "default_steps")]
    steps: u64,
    #[serde(default)]
    cases: Vec<CaseSpec>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_pause")]
    pause_seconds: f64,
    /// Threads per timed run; 1 keeps each trial on the calling thread.
    #[serde(default = "default_bench_workers")]
    bench_workers: usize,
    #[serde(default)]
    baseline: usize,
    #[serde(default)]
    thresholds: Thresholds,
}

fn default_steps() -> u64 {
    10
}

fn default_trials() -> usize {
    70
}

fn default_pause() -> f64 {
    10.0
}

fn default_bench_workers() -> usize {
    1
}

#[derive(Serialize)]
struct Comparison {
    baseline: String,
    case: String,
    speedup: f64,
    #[serde(flatten)]
    tests: TTestResult,
}

#[derive(Serialize)]
struct BenchSummary {
    report: BenchReport,
    comparisons: Vec<Comparison>,
}

fn default_cases(models: &[NeurVecModel], steps: u64) -> Vec<CaseSpec> {
    let Some(first) = models.first() else { return Vec::new() };
    let mut cases = vec![CaseSpec {
        label: format!("{}-fine", first.meta.scheme.name()),
        scheme: first.meta.scheme,
        dt: first.meta.fine_dt,
        steps: steps * first.meta.k,
        model: None,
    }];
    for (i, m) in models.iter().enumerate() {
        let tag = if models.len() > 1 { format!("{}-{i}", m.meta.scheme.name()) } else { m.meta.scheme.name().into() };
        let dt = m.meta.coarse_dt();
        cases.push(CaseSpec { label: format!("{tag}-coarse"), scheme: m.meta.scheme, dt, steps, model: None });
        cases.push(CaseSpec { label: format!("{tag}-corrected"), scheme: m.meta.scheme, dt, steps, model: Some(i) });
    }
    cases
}

pub fn run(run: &mut Run, layers: &Layers) -> CliResult<Outcome> {
    let mut config: BenchConfig = typed(layers.table.clone())?;
    let dataset = read_dataset(run, "dataset", require(&config.dataset, "dataset")?)?;
    let system = dataset.config.system.clone();
    let mut init = dataset.initial_states();
    drop(dataset);
    if let Some(rows) = config.rows {
        if rows == 0 || rows > init.n() {
            return Err(CliError::InvalidConfig(format!("rows must be in 1..={}, got {rows}", init.n())));
        }
        init = init.select_rows(0..rows);
    }
    let mut models = Vec::with_capacity(config.models.len());
    for (i, path) in config.models.iter().enumerate() {
        models.push(read_model(run, &format!("model{i}"), Path::new(path))?.0);
    }
    if config.cases.is_empty() {
        config.cases = default_cases(&models, config.steps);
    }
    if config.cases.is_empty() {
        return Err(CliError::InvalidConfig("bench needs `cases` or at least one model".into()));
    }
    if !(config.pause_seconds >= 0.0 && config.pause_seconds.is_finite()) {
        return Err(CliError::InvalidConfig(format!("pause_seconds must be >= 0, got {}", config.pause_seconds)));
    }

    let mut cases = Vec::with_capacity(config.cases.len());
    for spec in &config.cases {
        let model = match spec.model {
            Some(i) => Some(models.get(i).ok_or_else(|| {
                CliError::InvalidConfig(format!("case {} refers to model {i}, only {} given", spec.label, models.len()))
            })?),
            None => None,
        };
        cases.push(BenchCase {
            label: spec.label.clone(),
            scheme: spec.scheme,
            system: &system,
            model,
            init: &init,
            plan: IntegrationPlan::new(spec.dt, spec.steps, spec.steps)?,
        });
    }
    let options = BenchOptions {
        trials: config.trials,
        pause: Duration::from_secs_f64(config.pause_seconds),
        workers: config.bench_workers,
        baseline: config.baseline,
    };
    eprintln!("timing {} cases x {} trials on {} trajectories", cases.len(), options.trials, init.n());
    let report = benchmark(&cases, &options)?;

    let base = &report.cases[config.baseline];
    let mut comparisons = Vec::new();
    let mut outcome_speedups = Vec::new();
    for case in report.cases.iter().filter(|c| c.label != base.label && c.failure.is_none()) {
        if base.failure.is_some() {
            break;
        }
        let Ok(tests) = t_tests(&base.times, &case.times) else { continue };
        let speedup = base.mean / case.mean;
        println!(
            "{:>24}: mean {:.3e} s, {speedup:.2}x vs {}, Welch p {:.2e}",
            case.label, case.mean, base.label, tests.welch.p
        );
        if case.corrected {
            outcome_speedups.push((case.label.clone(), speedup));
        }
        comparisons.push(Comparison { baseline: base.label.clone(), case: case.label.clone(), speedup, tests });
    }
    run.write("bench.tsv", report.to_table().render().as_bytes())?;
    let failures: Vec<String> =
        report.cases.iter().filter_map(|c| c.failure.as_ref().map(|f| format!("{}: {f}", c.label))).collect();
    let summary = BenchSummary { report, comparisons };
    run.write_toml("bench.toml", &summary)?;
    for f in &failures {
        eprintln!("case failed: {f}");
    }

    let mut outcome = Outcome::new(&config);
    for o in &summary.report.overheads {
        outcome.at_most(&format!("epsilon of {}", o.corrected), o.epsilon, config.thresholds.max_epsilon);
    }
    for (label, s) in outcome_speedups {
        outcome.at_least(&format!("speedup of {label}"), s, config.thresholds.min_speedup);
    }
    Ok(outcome)
}
