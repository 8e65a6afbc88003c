//! Metrics over simulated batches: error and energy curves, time-series
//! histograms, phase-space error fields, wall-clock benchmarks and t-tests.
//!
//! Every metric writes as a plain table (one header line, whitespace
//! separated numeric columns) through [`Table`].

mod bench;
mod curves;
mod error_map;
mod histogram;
mod stats;
mod table;

pub use bench::{benchmark, BenchCase, BenchOptions, BenchReport, CaseTiming};
pub use curves::{energy_error_curve, mse_curve, MseCurve};
pub use error_map::{error_map, ErrorField, GridSpec};
pub use histogram::{padded_range, time_series_histogram, HistogramGrid, TIME_BINS, VALUE_BINS};
pub use stats::{t_tests, TTest, TTestResult, P_VALUE_FLOOR};
pub use table::Table;
