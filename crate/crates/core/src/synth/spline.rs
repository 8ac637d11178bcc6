//! Natural cubic interpolating splines with linear extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise cubic through `(xs[i], ys[i])` with zero second derivative at
/// both ends, continued linearly outside `[xs[0], xs[n-1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodes but {} values",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spline nodes".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(
                "spline nodes must be strictly increasing".into(),
            ));
        }

        // Tridiagonal system for the interior second derivatives (Thomas algorithm).
        let mut m = vec![0.0; n];
        if n > 2 {
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..k {
                let f = h[i] / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    fn end_slopes(&self) -> (f64, f64) {
        let n = self.xs.len();
        let h0 = self.xs[1] - self.xs[0];
        let hn = self.xs[n - 1] - self.xs[n - 2];
        let left = (self.ys[1] - self.ys[0]) / h0 - h0 * (2.0 * self.m[0] + self.m[1]) / 6.0;
        let right =
            (self.ys[n - 1] - self.ys[n - 2]) / hn + hn * (2.0 * self.m[n - 1] + self.m[n - 2]) / 6.0;
        (left, right)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.xs.len();
        let (lo, hi) = (self.xs[0], self.xs[n - 1]);
        if t < lo {
            return self.ys[0] + self.end_slopes().0 * (t - lo);
        }
        if t > hi {
            return self.ys[n - 1] + self.end_slopes().1 * (t - hi);
        }
        // Segment i covers [xs[i], xs[i+1]].
        let i = match self.xs.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - t) / h;
        let b = (t - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}
