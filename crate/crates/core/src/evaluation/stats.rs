use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Smallest reported p-value. Smaller values are clamped and flagged.
pub const P_VALUE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub statistic: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// True when the exact p-value fell below [`P_VALUE_FLOOR`].
    pub p_clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// Pooled-variance two-sample test.
    pub student: TTest,
    /// Unequal-variance test with Welch-Satterthwaite degrees of freedom.
    pub welch: TTest,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn two_sided(statistic: f64, df: f64) -> TTest {
    let p = if statistic.is_infinite() { 0.0 } else { beta_reg(df / 2.0, 0.5, df / (df + statistic * statistic)) };
    let p_clamped = p < P_VALUE_FLOOR;
    TTest { statistic, df, p: if p_clamped { P_VALUE_FLOOR } else { p.min(1.0) }, p_clamped }
}

/// Student (pooled) and Welch two-sample t-tests of `a` against `b`.
pub fn t_tests(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "t-test needs at least two values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (m1, v1) = mean_var(a);
    let (m2, v2) = mean_var(b);
    if v1 == 0.0 && v2 == 0.0 && m1 == m2 {
        return Err(Error::DegenerateVariance);
    }
    let diff = m1 - m2;

    let df = n1 + n2 - 2.0;
    let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
    let student = two_sided(diff / (pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), df);

    let (s1, s2) = (v1 / n1, v2 / n2);
    let welch_df = if s1 + s2 > 0.0 {
        (s1 + s2).powi(2) / (s1 * s1 / (n1 - 1.0) + s2 * s2 / (n2 - 1.0))
    } else {
        df
    };
    let welch = two_sided(diff / (s1 + s2).sqrt(), welch_df);
    Ok(TTestResult { student, welch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values from a 50-digit arbitrary-precision evaluation of the
    // same formulas (regularized incomplete beta for the p-values).
    #[test]
    fn integer_samples_reference() {
        let r = t_tests(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_relative_eq!(r.student.statistic, -1.0, epsilon = 1e-10);
        assert_eq!(r.student.df, 8.0);
        assert_relative_eq!(r.student.p, 0.346_593_507_087_334_25, epsilon = 1e-8);
        assert_relative_eq!(r.welch.statistic, -1.0, epsilon = 1e-10);
        assert_relative_eq!(r.welch.df, 8.0, epsilon = 1e-12);
        assert_relative_eq!(r.welch.p, 0.346_593_507_087_334_25, epsilon = 1e-8);
    }

    #[test]
    fn unequal_variance_reference() {
        let r = t_tests(&[1.2, 3.4, 2.2, 5.1, 4.0, 3.3], &[7.5, 6.1, 9.9, 8.0]).unwrap();
        assert_relative_eq!(r.student.statistic, -5.011_601_085_847_019_5, epsilon = 1e-10);
        assert_relative_eq!(r.student.p, 0.001_037_687_928_763_022_7, epsilon = 1e-8);
        assert_relative_eq!(r.welch.statistic, -4.854_823_402_283_099_2, epsilon = 1e-10);
        assert_relative_eq!(r.welch.df, 5.880_001_310_663_782, epsilon = 1e-10);
        assert_relative_eq!(r.welch.p, 0.003_000_040_474_629_300_7, epsilon = 1e-8);
    }

    #[test]
    fn identical_samples() {
        let x = [0.3, 0.1, 0.7];
        let r = t_tests(&x, &x).unwrap();
        assert_eq!(r.student.statistic, 0.0);
        assert_eq!(r.student.p, 1.0);
        assert_eq!(r.welch.p, 1.0);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert!(matches!(t_tests(&[2.0, 2.0], &[2.0, 2.0, 2.0]), Err(Error::DegenerateVariance)));
        assert!(t_tests(&[1.0], &[1.0, 2.0]).is_err());
        let r = t_tests(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert!(r.student.p_clamped && r.student.p == P_VALUE_FLOOR);
    }

    #[test]
    fn separated_timings_are_significant() {
        let a: Vec<f64> = (0..70).map(|i| 1.0 + 0.01 * ((i * 37 % 11) as f64 - 5.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 5.0).collect();
        let r = t_tests(&a, &b).unwrap();
        assert!(r.student.p < 1e-3 && r.welch.p < 1e-3);
    }

    proptest! {
        #[test]
        fn pooled_equals_welch_for_mirrored_samples(
            x in proptest::collection::vec(-10.0f64..10.0, 3..20),
            shift in -5.0f64..5.0,
        ) {
            // Mirrored copies share size and variance.
            let m = x.iter().sum::<f64>() / x.len() as f64;
            prop_assume!(x.iter().any(|v| (v - m).abs() > 1e-6));
            let y: Vec<f64> = x.iter().map(|v| 2.0 * m - v + shift).collect();
            let r = t_tests(&x, &y).unwrap();
            prop_assert!((r.student.statistic - r.welch.statistic).abs() <= 1e-12 * r.student.statistic.abs().max(1.0));
            prop_assert!((r.student.df - r.welch.df).abs() <= 1e-9 * r.student.df);
        }
    }
}
