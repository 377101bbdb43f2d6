//! One-dimensional interpolants for profile approximation.

use crate::error::{Error, Result};

/// Cubic interpolating spline with Forsythe-Malcolm-Moler end conditions:
/// the third derivative at each end matches that of the cubic through the
/// four nearest knots. Reproduces cubic polynomials exactly.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

fn check_knots(x: &[f64], y: &[f64], min: usize) -> Result<Vec<usize>> {
    if x.len() != y.len() {
        return Err(Error::invalid("knot abscissae and values differ in length"));
    }
    if x.len() < min {
        return Err(Error::InsufficientData { needed: min, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite knot"));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    if idx.windows(2).any(|w| x[w[0]] == x[w[1]]) {
        return Err(Error::invalid("duplicate knot abscissae"));
    }
    Ok(idx)
}

impl CubicSpline {
    /// Knots need not be sorted; at least four are required.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let idx = check_knots(x, y, 4)?;
        let x: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let n = x.len();
        let nm1 = n - 1;
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];

        // Tridiagonal system: b diagonal, d off-diagonal, c right-hand side.
        d[0] = x[1] - x[0];
        c[1] = (y[1] - y[0]) / d[0];
        for i in 1..nm1 {
            d[i] = x[i + 1] - x[i];
            b[i] = 2.0 * (d[i - 1] + d[i]);
            c[i + 1] = (y[i + 1] - y[i]) / d[i];
            c[i] = c[i + 1] - c[i];
        }
        b[0] = -d[0];
        b[nm1] = -d[n - 2];
        c[0] = c[2] / (x[3] - x[1]) - c[1] / (x[2] - x[0]);
        c[nm1] = c[n - 2] / (x[nm1] - x[n - 3]) - c[n - 3] / (x[n - 2] - x[n - 4]);
        c[0] = c[0] * d[0] * d[0] / (x[3] - x[0]);
        c[nm1] = -c[nm1] * d[n - 2] * d[n - 2] / (x[nm1] - x[n - 4]);

        for i in 1..=nm1 {
            let t = d[i - 1] / b[i - 1];
            b[i] -= t * d[i - 1];
            c[i] -= t * c[i - 1];
        }
        c[nm1] /= b[nm1];
        for i in (0..nm1).rev() {
            c[i] = (c[i] - d[i] * c[i + 1]) / b[i];
        }

        b[nm1] = (y[nm1] - y[n - 2]) / d[n - 2] + d[n - 2] * (c[n - 2] + 2.0 * c[nm1]);
        for i in 0..nm1 {
            b[i] = (y[i + 1] - y[i]) / d[i] - d[i] * (c[i + 1] + 2.0 * c[i]);
            d[i] = (c[i + 1] - c[i]) / d[i];
            c[i] *= 3.0;
        }
        c[nm1] *= 3.0;
        d[nm1] = d[n - 2];
        Ok(CubicSpline { x, y, b, c, d })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = segment(&self.x, t);
        let dx = t - self.x[i];
        self.y[i] + dx * (self.b[i] + dx * (self.c[i] + dx * self.d[i]))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = segment(&self.x, t);
        let dx = t - self.x[i];
        self.b[i] + dx * (2.0 * self.c[i] + 3.0 * dx * self.d[i])
    }
}

/// Index of the polynomial piece used at `t`; pieces extend past the ends.
fn segment(x: &[f64], t: f64) -> usize {
    if t <= x[0] {
        return 0;
    }
    let n = x.len();
    if t >= x[n - 1] {
        return n - 1;
    }
    x.partition_point(|v| *v <= t) - 1
}

/// Piecewise cubic Hermite interpolant through values and slopes.
///
/// Outside the knot range the end pieces are continued.
#[derive(Clone, Debug)]
pub struct HermiteSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(x: &[f64], y: &[f64], slopes: &[f64]) -> Result<Self> {
        let idx = check_knots(x, y, 2)?;
        if slopes.len() != x.len() || slopes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("slopes must be finite and match the knots"));
        }
        Ok(HermiteSpline {
            x: idx.iter().map(|&i| x[i]).collect(),
            y: idx.iter().map(|&i| y[i]).collect(),
            s: idx.iter().map(|&i| slopes[i]).collect(),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = segment(&self.x, t).min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.y[i] + h10 * h * self.s[i] + h01 * self.y[i + 1] + h11 * h * self.s[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics() {
        let p = |t: f64| 0.5 - 2.0 * t + 3.0 * t * t - 1.5 * t * t * t;
        let x = [0.05, 0.21, 0.3, 0.52, 0.77, 0.93];
        let y: Vec<f64> = x.iter().map(|&t| p(t)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!((s.eval(t) - p(t)).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn exact_at_knots_and_unsorted_input() {
        let x = [0.9, 0.1, 0.5, 0.3, 0.7];
        let y = [1.0, -2.0, 0.25, 4.0, 0.0];
        let s = CubicSpline::new(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_four_knots() {
        assert!(matches!(
            CubicSpline::new(&[0.0, 0.5, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
        assert!(CubicSpline::new(&[0.0, 0.5, 0.5, 1.0], &[1.0, 2.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn hermite_matches_cubic_with_exact_slopes() {
        let p = |t: f64| t * t * t - t;
        let dp = |t: f64| 3.0 * t * t - 1.0;
        let x = [0.0, 0.4, 1.0];
        let y: Vec<f64> = x.iter().map(|&t| p(t)).collect();
        let s: Vec<f64> = x.iter().map(|&t| dp(t)).collect();
        let h = HermiteSpline::new(&x, &y, &s).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((h.eval(t) - p(t)).abs() < 1e-12);
        }
    }
}
