use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Table;
use crate::error::{Error, Result};
use crate::solvers::Trajectory;

pub const TIME_BINS: usize = 800;
pub const VALUE_BINS: usize = 100;

/// Curve-crossing counts on a `TIME_BINS x VALUE_BINS` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub variable: String,
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Time-major: `counts[t * VALUE_BINS + v]`.
    pub counts: Vec<u32>,
}

impl HistogramGrid {
    pub fn count(&self, time_bin: usize, value_bin: usize) -> u32 {
        self.counts[time_bin * VALUE_BINS + value_bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Columns `time value count`, one row per cell, at bin centres.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["time", "value", "count"]);
        let tw = (self.t_end - self.t_start) / TIME_BINS as f64;
        let vw = (self.hi - self.lo) / VALUE_BINS as f64;
        for t in 0..TIME_BINS {
            for v in 0..VALUE_BINS {
                table.push(vec![
                    self.t_start + (t as f64 + 0.5) * tw,
                    self.lo + (v as f64 + 0.5) * vw,
                    f64::from(self.count(t, v)),
                ]);
            }
        }
        table
    }
}

/// Min/max of component `index` over every row and sample, widened by
/// `pad` times the span on each side. A constant series gets a unit span.
pub fn padded_range(trajs: &Trajectory, index: usize, pad: f64) -> Result<(f64, f64)> {
    if index >= trajs.d {
        return Err(Error::DimensionMismatch { expected: trajs.d, found: index + 1 });
    }
    let (lo, hi) = trajs
        .states
        .chunks_exact(trajs.d)
        .map(|r| r[index])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::EmptyRange { lo, hi });
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok((lo - pad * span, hi + pad * span))
}

/// Counts, for every trajectory, the cells its piecewise-linear curve of
/// component `index` passes through. Time bins are closed intervals, so a
/// curve touching a shared edge marks both neighbours. Each trajectory marks
/// a cell at most once; portions outside `[lo, hi]` are ignored.
pub fn time_series_histogram(
    trajs: &Trajectory,
    index: usize,
    variable: &str,
    range: (f64, f64),
) -> Result<HistogramGrid> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::EmptyRange { lo, hi });
    }
    if index >= trajs.d {
        return Err(Error::DimensionMismatch { expected: trajs.d, found: index + 1 });
    }
    if trajs.samples() < 2 {
        return Err(Error::ShapeMismatch("histogram needs at least two samples".into()));
    }
    let times = &trajs.times;
    let (t_start, t_end) = (times[0], times[times.len() - 1]);
    let edges: Vec<f64> =
        (0..=TIME_BINS).map(|i| t_start + (t_end - t_start) * i as f64 / TIME_BINS as f64).collect();

    let counts = (0..trajs.n)
        .into_par_iter()
        .fold(
            || vec![0u32; TIME_BINS * VALUE_BINS],
            |mut counts, row| {
                let series: Vec<f64> = (0..trajs.samples()).map(|s| trajs.state(s, row)[index]).collect();
                mark_curve(times, &series, &edges, lo, hi, &mut counts);
                counts
            },
        )
        .reduce(
            || vec![0u32; TIME_BINS * VALUE_BINS],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(HistogramGrid { variable: variable.to_string(), index, lo, hi, t_start, t_end, counts })
}

fn value_bin(v: f64, lo: f64, hi: f64) -> usize {
    let b = ((v - lo) / (hi - lo) * VALUE_BINS as f64).floor();
    (b.max(0.0) as usize).min(VALUE_BINS - 1)
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let j = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
    let (t0, t1) = (times[j - 1], times[j]);
    let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    values[j - 1] + w * (values[j] - values[j - 1])
}

fn mark_curve(times: &[f64], values: &[f64], edges: &[f64], lo: f64, hi: f64, counts: &mut [u32]) {
    let mut k = 0;
    for (tb, win) in edges.windows(2).enumerate() {
        let (ta, tz) = (win[0], win[1]);
        let va = interpolate(times, values, ta);
        let vz = interpolate(times, values, tz);
        let (mut vmin, mut vmax) = (va.min(vz), va.max(vz));
        while k < times.len() && times[k] <= ta {
            k += 1;
        }
        let mut j = k;
        while j < times.len() && times[j] < tz {
            vmin = vmin.min(values[j]);
            vmax = vmax.max(values[j]);
            j += 1;
        }
        if vmax < lo || vmin > hi || vmin.is_nan() || vmax.is_nan() {
            continue;
        }
        let row = &mut counts[tb * VALUE_BINS..(tb + 1) * VALUE_BINS];
        for c in &mut row[value_bin(vmin, lo, hi)..=value_bin(vmax, lo, hi)] {
            *c += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_batch(series: &[Vec<f64>], eta: f64) -> Trajectory {
        let samples = series[0].len();
        let n = series.len();
        let mut states = Vec::with_capacity(samples * n);
        for s in 0..samples {
            for row in series {
                states.push(row[s]);
            }
        }
        Trajectory { times: (0..samples).map(|i| i as f64 * eta).collect(), n, d: 1, states }
    }

    #[test]
    fn constant_curve_marks_one_row() {
        let t = scalar_batch(&[vec![0.37; 51]], 0.1);
        let h = time_series_histogram(&t, 0, "x", (0.0, 1.0)).unwrap();
        assert_eq!(h.total(), TIME_BINS as u64);
        for tb in 0..TIME_BINS {
            assert_eq!(h.count(tb, 37), 1);
        }
    }

    #[test]
    fn linear_curve_spans_tile_the_value_axis() {
        let t = scalar_batch(&[vec![0.0, 1.0]], 1.0);
        let h = time_series_histogram(&t, 0, "x", (0.0, 1.0)).unwrap();
        let mut prev_hi = 0;
        for tb in 0..TIME_BINS {
            let marked: Vec<usize> = (0..VALUE_BINS).filter(|&v| h.count(tb, v) == 1).collect();
            let (a, b) = (marked[0], *marked.last().unwrap());
            assert_eq!(marked.len(), b - a + 1, "span must be contiguous");
            assert!(a == prev_hi || a == prev_hi + 1 || tb == 0);
            prev_hi = b;
        }
        assert_eq!(prev_hi, VALUE_BINS - 1);
        for v in 0..VALUE_BINS {
            assert!((0..TIME_BINS).any(|tb| h.count(tb, v) > 0));
        }
    }

    #[test]
    fn empty_range_is_rejected() {
        let t = scalar_batch(&[vec![0.0, 1.0]], 1.0);
        assert!(matches!(time_series_histogram(&t, 0, "x", (1.0, 1.0)), Err(Error::EmptyRange { .. })));
        assert!(time_series_histogram(&t, 0, "x", (0.0, f64::INFINITY)).is_err());
    }

    /// Resamples every time bin at 100 points per bin and marks the bin of
    /// each point.
    fn dense_oracle(series: &[Vec<f64>], eta: f64, lo: f64, hi: f64) -> Vec<u32> {
        let mut counts = vec![0u32; TIME_BINS * VALUE_BINS];
        let t_end = eta * (series[0].len() - 1) as f64;
        for s in series {
            for tb in 0..TIME_BINS {
                let mut seen = [false; VALUE_BINS];
                for j in 0..=100 {
                    let t = t_end * (tb as f64 + j as f64 / 100.0) / TIME_BINS as f64;
                    let x = t / eta;
                    let i = (x.floor() as usize).min(s.len() - 2);
                    let v = s[i] + (x - i as f64) * (s[i + 1] - s[i]);
                    if v >= lo && v <= hi {
                        let b = (((v - lo) / (hi - lo) * VALUE_BINS as f64) as usize).min(VALUE_BINS - 1);
                        seen[b] = true;
                    }
                }
                for (v, hit) in seen.iter().enumerate() {
                    counts[tb * VALUE_BINS + v] += u32::from(*hit);
                }
            }
        }
        counts
    }

    #[test]
    fn matches_dense_resampling_oracle() {
        use crate::rng::SeedStream;
        let mut rng = SeedStream::new(11, 0);
        // 81 samples put knots on every tenth time-bin edge.
        let series: Vec<Vec<f64>> =
            (0..10).map(|_| (0..81).map(|_| rng.uniform(0.05, 0.95)).collect()).collect();
        let t = scalar_batch(&series, 0.25);
        let h = time_series_histogram(&t, 0, "x", (0.0, 1.0)).unwrap();
        assert_eq!(h.counts, dense_oracle(&series, 0.25, 0.0, 1.0));
    }

    #[test]
    fn padded_range_widens_by_five_percent() {
        let t = scalar_batch(&[vec![1.0, 3.0]], 1.0);
        assert_eq!(padded_range(&t, 0, 0.05).unwrap(), (0.9, 3.1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn invariant_under_trajectory_reordering(
            series in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 9), 2..6),
            rot in 0usize..6,
        ) {
            let a = scalar_batch(&series, 0.5);
            let mut shuffled = series.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            let b = scalar_batch(&shuffled, 0.5);
            let ha = time_series_histogram(&a, 0, "x", (-1.5, 1.5)).unwrap();
            let hb = time_series_histogram(&b, 0, "x", (-1.5, 1.5)).unwrap();
            prop_assert_eq!(&ha.counts, &hb.counts);
            prop_assert!(ha.counts.iter().all(|&c| c as usize <= series.len()));
        }
    }
}
