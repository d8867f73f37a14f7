//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Butland
//! slopes) with constant extrapolation to the right of the last node.

/// Interpolant of one grid function.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    /// Integral of the interpolant from `x[0]` to `x[k]`.
    cumulative: Vec<f64>,
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl MonotoneCubic {
    /// `x` must be strictly increasing with at least two nodes.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "interpolation needs matching nodes and values");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        let mut cumulative = vec![0.0; n];
        for k in 0..n - 1 {
            cumulative[k + 1] = cumulative[k]
                + h[k] * (0.5 * (y[k] + y[k + 1]) + h[k] * (d[k] - d[k + 1]) / 12.0);
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
            cumulative,
        }
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn last(&self) -> f64 {
        *self.x.last().expect("nonempty")
    }

    pub fn value(&self, t: f64) -> f64 {
        if t >= self.last() {
            return *self.y.last().expect("nonempty");
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// Derivative of the interpolant; zero in the flat extension.
    pub fn slope(&self, t: f64) -> f64 {
        if t >= self.last() {
            return 0.0;
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        (dh00 * self.y[k] + dh01 * self.y[k + 1]) / h + dh10 * self.d[k] + dh11 * self.d[k + 1]
    }

    /// `int_{x_0}^{t} p(s) ds` in closed form, including the flat extension.
    pub fn integral(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t >= self.last() {
            return self.cumulative[n - 1] + (t - self.last()) * self.y[n - 1];
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let i00 = s - s3 + 0.5 * s4;
        let i10 = 0.5 * s2 - 2.0 * s3 / 3.0 + 0.25 * s4;
        let i01 = s3 - 0.5 * s4;
        let i11 = -s3 / 3.0 + 0.25 * s4;
        self.cumulative[k]
            + h * (i00 * self.y[k]
                + i10 * h * self.d[k]
                + i01 * self.y[k + 1]
                + i11 * h * self.d[k + 1])
    }

    /// Node slopes of the interpolant.
    pub fn node_slopes(&self) -> &[f64] {
        &self.d
    }
}
