//! Shape-preserving piecewise cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Monotone piecewise cubic Hermite interpolant through strictly increasing
/// knots.
///
/// Slopes are limited with the Fritsch–Carlson conditions, so monotone data
/// produce a monotone interpolant with no overshoot.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// PCHIP slopes estimated from the data alone.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_knots(&xs, &ys)?;
        let secants = secants(&xs, &ys);
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes.fill(secants[0]);
        } else {
            for i in 1..n - 1 {
                let (d0, d1) = (secants[i - 1], secants[i]);
                if d0 * d1 > 0.0 {
                    // weighted harmonic mean
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(
                xs[n - 1] - xs[n - 2],
                xs[n - 2] - xs[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Uses caller-supplied slopes (e.g. known analytic derivatives),
    /// limited where necessary to keep the interpolant monotone.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        check_knots(&xs, &ys)?;
        if slopes.len() != xs.len() {
            return Err(Error::InvalidParams("one slope per knot is required".into()));
        }
        let secants = secants(&xs, &ys);
        for (k, &d) in secants.iter().enumerate() {
            if d == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            for idx in [k, k + 1] {
                if slopes[idx] * d < 0.0 {
                    slopes[idx] = 0.0;
                }
            }
            let a = slopes[k] / d;
            let b = slopes[k + 1] / d;
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[k] = tau * a * d;
                slopes[k + 1] = tau * b * d;
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Evaluates at `x`, clamped to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn check_knots(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InvalidParams("need at least two knots with matching values".into()));
    }
    if let Some(k) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneTable { index: k + 1 });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("knots must be finite".into()));
    }
    Ok(())
}

fn secants(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect()
}

/// One-sided three-point end slope, limited to preserve shape.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
