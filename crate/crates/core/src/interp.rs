//! Monotone piecewise-cubic Hermite interpolation (PCHIP).
//!
//! Interior slopes use the weighted harmonic mean of neighbouring secants and
//! are zeroed at local extrema; endpoint slopes use the one-sided three-point
//! formula with the usual shape-preserving limits. On strictly monotone data
//! the interpolant is strictly monotone, so its inverse is well defined.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot abscissae must be strictly increasing")]
    NotIncreasing,
    #[error("knot arrays differ in length")]
    LengthMismatch,
    #[error("query {0} outside [{1}, {2}]")]
    OutOfRange(f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Hermite derivative at each knot.
    slopes: Vec<f64>,
}

fn endpoint_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        let n = xs.len();
        if ys.len() != n {
            return Err(InterpError::LengthMismatch);
        }
        if n < 2 {
            return Err(InterpError::TooFewKnots(n));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(InterpError::NotIncreasing);
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                let (a, b) = (delta[i - 1], delta[i]);
                if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
                    slopes[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / a + w2 / b);
                }
            }
            slopes[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.xs
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> Result<usize, InterpError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(InterpError::OutOfRange(x, lo, hi));
        }
        let i = self.xs.partition_point(|k| *k <= x);
        Ok(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn eval(&self, x: f64) -> Result<f64, InterpError> {
        let i = self.segment(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        Ok(h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1])
    }

    pub fn derivative(&self, x: f64) -> Result<f64, InterpError> {
        let i = self.segment(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let d00 = 6.0 * t * t - 6.0 * t;
        let d10 = 3.0 * t * t - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t * t - 2.0 * t;
        Ok((d00 * self.ys[i] + d01 * self.ys[i + 1]) / h + d10 * self.slopes[i] + d11 * self.slopes[i + 1])
    }

    /// Abscissa where an increasing interpolant reaches `y`, by bisection to
    /// `rel_tol` relative width. Exact at knots.
    pub fn inverse_increasing(&self, y: f64, rel_tol: f64) -> Result<f64, InterpError> {
        let n = self.ys.len();
        let (ylo, yhi) = (self.ys[0], self.ys[n - 1]);
        if !(y >= ylo && y <= yhi) {
            return Err(InterpError::OutOfRange(y, ylo, yhi));
        }
        if let Some(i) = self.ys.iter().position(|v| *v == y) {
            return Ok(self.xs[i]);
        }
        let j = self.ys.partition_point(|v| *v < y);
        let (mut lo, mut hi) = (self.xs[j - 1], self.xs[j]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)? < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn interpolates_knots() {
        let xs = vec![0.0, 1.0, 2.5, 4.0];
        let ys = vec![0.0, 1.0, 1.5, 4.0];
        let p = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(p.eval(*x).unwrap(), *y);
        }
    }

    #[test]
    fn reproduces_a_line() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let p = MonotoneCubic::new(xs, ys).unwrap();
        for i in 0..=35 {
            let x = i as f64 * 0.1;
            assert_relative_eq!(p.eval(x).unwrap(), 3.0 * x + 1.0, max_relative = 1e-12);
            assert_relative_eq!(p.derivative(x).unwrap(), 3.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert_eq!(MonotoneCubic::new(vec![0.0], vec![1.0]), Err(InterpError::TooFewKnots(1)));
        assert_eq!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]), Err(InterpError::NotIncreasing));
        let p = MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(p.eval(1.5), Err(InterpError::OutOfRange(..))));
        assert!(matches!(p.inverse_increasing(2.0, 1e-10), Err(InterpError::OutOfRange(..))));
    }

    #[test]
    fn no_overshoot_on_step_data() {
        let p = MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        for i in 0..=300 {
            let v = p.eval(i as f64 * 0.01).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(
            steps in proptest::collection::vec((0.01f64..3.0, 0.001f64..5.0), 3..12)
        ) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in &steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(ys.last().unwrap() + dy);
            }
            let p = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
            let (lo, hi) = p.domain();
            let mut last = f64::NEG_INFINITY;
            for i in 0..=400 {
                let x = (lo + (hi - lo) * i as f64 / 400.0).min(hi);
                let v = p.eval(x).unwrap();
                prop_assert!(v >= last - 1e-12);
                last = v;
                let back = p.inverse_increasing(v, 1e-12).unwrap();
                prop_assert!((p.eval(back).unwrap() - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert_eq!(p.inverse_increasing(*y, 1e-12).unwrap(), *x);
            }
        }
    }
}
