//! Monotone piecewise-cubic (Fritsch–Carlson / PCHIP) interpolation with
//! exact antiderivatives.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    /// Integral of the interpolant from `x[0]` to `x[i]`.
    cum: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Construction(
                "monotone cubic needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Construction("non-finite table entry".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Construction("abscissa must be strictly increasing".into()));
        }
        let m = pchip_slopes(&x, &y);
        let mut cum = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let h = x[i + 1] - x[i];
            cum[i + 1] = cum[i] + h * (y[i] + y[i + 1]) / 2.0 + h * h * (m[i] - m[i + 1]) / 12.0;
        }
        Ok(Self { x, y, m, cum })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn y_max(&self) -> f64 {
        *self.y.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn tail_slope(&self) -> f64 {
        self.m.last().copied().unwrap().max(0.0)
    }

    /// Interpolated value; linear extrapolation beyond the last knot.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.x.len() - 1;
        if t >= self.x[last] {
            return self.y[last] + self.tail_slope() * (t - self.x[last]);
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let last = self.x.len() - 1;
        if t >= self.x[last] {
            return self.tail_slope();
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (d00 * self.y[i] + d01 * self.y[i + 1]) / h + d10 * self.m[i] + d11 * self.m[i + 1]
    }

    /// Exact integral of the interpolant from `x[0]` to `t`.
    pub fn integral(&self, t: f64) -> f64 {
        let last = self.x.len() - 1;
        if t >= self.x[last] {
            let d = t - self.x[last];
            return self.cum[last] + self.y[last] * d + 0.5 * self.tail_slope() * d * d;
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let i00 = s - s3 + s4 / 2.0;
        let i10 = s2 / 2.0 - 2.0 * s3 / 3.0 + s4 / 4.0;
        let i01 = s3 - s4 / 2.0;
        let i11 = -s3 / 3.0 + s4 / 4.0;
        self.cum[i]
            + h * (i00 * self.y[i]
                + i10 * h * self.m[i]
                + i01 * self.y[i + 1]
                + i11 * h * self.m[i + 1])
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
