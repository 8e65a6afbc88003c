//! Trainable rational activation `P(x) / Q(x)` with a cubic numerator and a
//! quadratic denominator.

use serde::{Deserialize, Serialize};

/// Floor applied to `b2` and `b0` by [`RationalCoeffs::project`].
pub const MIN_LEADING: f64 = 1e-3;

/// Relative margin kept between `b1^2` and `4 b2 b0`.
pub const DISCRIMINANT_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalCoeffs {
    /// Numerator `a0 + a1 x + a2 x^2 + a3 x^3`.
    pub a: [f64; 4],
    /// Denominator `b0 + b1 x + b2 x^2`.
    pub b: [f64; 3],
}

impl Default for RationalCoeffs {
    /// Initial coefficients of the reference network.
    fn default() -> Self {
        Self { a: [0.0218, 0.5000, 0.5957, 1.1915], b: [1.0000, 0.0000, 2.3830] }
    }
}

impl RationalCoeffs {
    #[inline]
    pub fn numerator(&self, x: f64) -> f64 {
        let a = &self.a;
        ((a[3] * x + a[2]) * x + a[1]) * x + a[0]
    }

    #[inline]
    pub fn denominator(&self, x: f64) -> f64 {
        let b = &self.b;
        (b[2] * x + b[1]) * x + b[0]
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.numerator(x) / self.denominator(x)
    }

    /// `dσ/dx`.
    pub fn derivative(&self, x: f64) -> f64 {
        let a = &self.a;
        let b = &self.b;
        let q = self.denominator(x);
        let dp = (3.0 * a[3] * x + 2.0 * a[2]) * x + a[1];
        let dq = 2.0 * b[2] * x + b[1];
        (dp - self.eval(x) * dq) / q
    }

    /// True when the denominator has no real root and opens upward.
    pub fn denominator_is_positive(&self) -> bool {
        let [b0, b1, b2] = self.b;
        b2 > 0.0 && b0 > 0.0 && b1 * b1 < 4.0 * b2 * b0
    }

    /// Restores a strictly positive denominator after an optimizer step:
    /// `b2` and `b0` are floored at [`MIN_LEADING`], then `b1` is shrunk
    /// toward zero until `b1^2 < 4 b2 b0 (1 - DISCRIMINANT_MARGIN)`.
    pub fn project(&mut self) {
        let [b0, b1, b2] = &mut self.b;
        if !(*b2 > MIN_LEADING) {
            *b2 = MIN_LEADING;
        }
        if !(*b0 > MIN_LEADING) {
            *b0 = MIN_LEADING;
        }
        let limit = 4.0 * *b2 * *b0 * (1.0 - DISCRIMINANT_MARGIN);
        if *b1 * *b1 >= limit {
            *b1 = b1.signum() * limit.sqrt() * (1.0 - DISCRIMINANT_MARGIN);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_zero_is_a0_over_b0() {
        let r = RationalCoeffs::default();
        assert_eq!(r.eval(0.0), 0.0218);
        assert!(r.denominator_is_positive());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let r = RationalCoeffs::default();
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (r.eval(x + h) - r.eval(x - h)) / (2.0 * h);
            assert!((fd - r.derivative(x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn projection_repairs_denominator() {
        let mut r = RationalCoeffs { a: [0.0; 4], b: [1.0, 5.0, 2.0] };
        r.project();
        assert!(r.denominator_is_positive());
        assert!(r.b[1] > 0.0);

        let mut r = RationalCoeffs { a: [0.0; 4], b: [-1.0, -0.5, -2.0] };
        r.project();
        assert!(r.denominator_is_positive());
        assert!(r.b[1] < 0.0);

        let mut ok = RationalCoeffs::default();
        let before = ok;
        ok.project();
        assert_eq!(ok, before);
    }
}
