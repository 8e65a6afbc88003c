use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::Table;
use crate::error::{Error, Result};
use crate::neurvec::NeurVecModel;
use crate::solvers::{integrate, integrate_partitioned, integrate_with_corrector, IntegrationPlan, Scheme};
use crate::systems::{StateBatch, System};

/// One timed configuration.
#[derive(Clone, Debug)]
pub struct BenchCase<'a> {
    pub label: String,
    pub scheme: Scheme,
    pub system: &'a System,
    pub model: Option<&'a NeurVecModel>,
    pub init: &'a StateBatch,
    pub plan: IntegrationPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub trials: usize,
    /// Sleep between consecutive runs.
    pub pause: Duration,
    /// 1 runs on the calling thread; more splits the batch into that many
    /// equal row blocks on a dedicated pool.
    pub workers: usize,
    /// Index of the case whose mean time is one unit.
    pub baseline: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { trials: 70, pause: Duration::from_secs(10), workers: 1, baseline: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseTiming {
    pub label: String,
    pub scheme: Scheme,
    pub corrected: bool,
    pub dt: f64,
    pub steps: u64,
    /// Seconds per trial, in run order.
    pub times: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    /// `mean / baseline mean`.
    pub normalized: f64,
    pub failure: Option<String>,
}

impl CaseTiming {
    pub fn per_step(&self) -> f64 {
        self.mean / self.steps as f64
    }
}

/// Overhead of a corrected case against the bare case with the same scheme
/// and step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overhead {
    pub corrected: String,
    pub bare: String,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub trials: usize,
    pub pause_seconds: f64,
    pub workers: usize,
    pub baseline: String,
    pub cases: Vec<CaseTiming>,
    pub overheads: Vec<Overhead>,
}

impl BenchReport {
    pub fn case(&self, label: &str) -> Option<&CaseTiming> {
        self.cases.iter().find(|c| c.label == label)
    }

    /// `mean(slow) / mean(fast)`.
    pub fn speedup(&self, slow: &str, fast: &str) -> Option<f64> {
        Some(self.case(slow)?.mean / self.case(fast)?.mean)
    }

    /// `per_step(corrected) / per_step(bare) - 1`.
    pub fn epsilon(corrected: &CaseTiming, bare: &CaseTiming) -> f64 {
        corrected.per_step() / bare.per_step() - 1.0
    }

    /// Columns `case steps mean std normalized`, cases numbered in input order.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["case", "steps", "mean", "std", "normalized"]);
        for (i, c) in self.cases.iter().enumerate() {
            t.push(vec![i as f64, c.steps as f64, c.mean, c.std, c.normalized]);
        }
        t
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn run_once(case: &BenchCase, pool: Option<&rayon::ThreadPool>, workers: usize) -> Result<f64> {
    let start = Instant::now();
    let out = match (pool, case.model) {
        (Some(pool), model) => pool
            .install(|| integrate_partitioned(case.scheme, case.system, model, case.init, &case.plan, workers)),
        (None, Some(m)) => integrate_with_corrector(case.scheme, case.system, m, case.init, &case.plan),
        (None, None) => integrate(case.scheme, case.system, case.init, &case.plan),
    };
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(out?);
    Ok(elapsed)
}

/// Times every case `trials` times, round-robin, sleeping `pause` between
/// consecutive runs. Only the integration call is inside the clock. A case
/// that fails is reported with its error and no timings.
pub fn benchmark(cases: &[BenchCase], options: &BenchOptions) -> Result<BenchReport> {
    if options.trials < 2 {
        return Err(Error::InvalidConfig("benchmark needs at least two trials".into()));
    }
    if options.baseline >= cases.len() {
        return Err(Error::InvalidConfig(format!("baseline index {} out of range", options.baseline)));
    }
    let workers = options.workers.max(1);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut times = vec![Vec::with_capacity(options.trials); cases.len()];
    let mut failures: Vec<Option<String>> = vec![None; cases.len()];
    let mut first = true;
    for _ in 0..options.trials {
        for (i, case) in cases.iter().enumerate() {
            if failures[i].is_some() {
                continue;
            }
            if !first && !options.pause.is_zero() {
                std::thread::sleep(options.pause);
            }
            first = false;
            match run_once(case, pool.as_ref(), workers) {
                Ok(t) => times[i].push(t),
                Err(e) => {
                    failures[i] = Some(e.to_string());
                    times[i].clear();
                }
            }
        }
    }

    let mut timings: Vec<CaseTiming> = cases
        .iter()
        .zip(times)
        .zip(failures)
        .map(|((case, times), failure)| {
            let (mean, std) = mean_std(&times);
            CaseTiming {
                label: case.label.clone(),
                scheme: case.scheme,
                corrected: case.model.is_some(),
                dt: case.plan.dt,
                steps: case.plan.n_steps,
                times,
                mean,
                std,
                normalized: f64::NAN,
                failure,
            }
        })
        .collect();
    let unit = timings[options.baseline].mean;
    for t in &mut timings {
        t.normalized = t.mean / unit;
    }

    let mut overheads = Vec::new();
    for (i, c) in cases.iter().enumerate().filter(|(_, c)| c.model.is_some()) {
        let bare = cases.iter().position(|b| {
            b.model.is_none() && b.scheme == c.scheme && b.system == c.system && b.plan.dt == c.plan.dt
        });
        if let Some(j) = bare {
            overheads.push(Overhead {
                corrected: c.label.clone(),
                bare: cases[j].label.clone(),
                epsilon: BenchReport::epsilon(&timings[i], &timings[j]),
            });
        }
    }

    Ok(BenchReport {
        trials: options.trials,
        pause_seconds: options.pause.as_secs_f64(),
        workers,
        baseline: cases[options.baseline].label.clone(),
        cases: timings,
        overheads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn options(trials: usize) -> BenchOptions {
        BenchOptions { trials, pause: Duration::ZERO, workers: 1, baseline: 0 }
    }

    #[test]
    fn normalization_is_ratio_of_means() {
        let sys = System::elastic_pendulum();
        let init = sys.sample_initial(8, 1).unwrap();
        let plan = IntegrationPlan::new(0.01, 20, 20).unwrap();
        let cases = vec![
            BenchCase { label: "a".into(), scheme: Scheme::Rk4, system: &sys, model: None, init: &init, plan },
            BenchCase { label: "b".into(), scheme: Scheme::Euler, system: &sys, model: None, init: &init, plan },
        ];
        let r = benchmark(&cases, &options(3)).unwrap();
        for c in &r.cases {
            let mean = c.times.iter().sum::<f64>() / c.times.len() as f64;
            assert_eq!(c.mean, mean);
            assert_eq!(c.normalized, mean / r.cases[0].mean);
            assert_eq!(c.times.len(), 3);
        }
        assert_eq!(r.cases[0].normalized, 1.0);
        assert!(r.overheads.is_empty());
    }

    #[test]
    fn fine_step_is_much_slower_than_coarse() {
        let sys = System::elastic_pendulum();
        let init = sys.sample_initial(32, 2).unwrap();
        let coarse = IntegrationPlan::new(0.1, 10, 10).unwrap();
        let fine = IntegrationPlan::new(0.001, 1000, 1000).unwrap();
        let cases = vec![
            BenchCase { label: "coarse".into(), scheme: Scheme::Rk4, system: &sys, model: None, init: &init, plan: coarse },
            BenchCase { label: "fine".into(), scheme: Scheme::Rk4, system: &sys, model: None, init: &init, plan: fine },
        ];
        let r = benchmark(&cases, &options(5)).unwrap();
        let ratio = r.speedup("fine", "coarse").unwrap();
        assert!(ratio > 50.0, "fine/coarse ratio {ratio}");
    }

    #[test]
    fn diverging_case_is_reported_not_fatal() {
        let sys = System::spring_chain();
        let init = sys.sample_initial(4, 3).unwrap();
        let plan = IntegrationPlan::new(5.0, 400, 400).unwrap();
        let ok = IntegrationPlan::new(0.01, 10, 10).unwrap();
        let cases = vec![
            BenchCase { label: "ok".into(), scheme: Scheme::Rk4, system: &sys, model: None, init: &init, plan: ok },
            BenchCase { label: "blowup".into(), scheme: Scheme::Euler, system: &sys, model: None, init: &init, plan },
        ];
        let r = benchmark(&cases, &options(2)).unwrap();
        assert!(r.cases[1].failure.is_some());
        assert!(r.cases[1].times.is_empty());
        assert!(r.cases[0].failure.is_none());
    }

    #[test]
    fn rejects_single_trial() {
        assert!(benchmark(&[], &options(1)).is_err());
    }
}
