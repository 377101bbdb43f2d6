//! Analytic objectives with exact gradients.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

use crate::error::{Error, Result};
use crate::optimize::Objective;

/// `sin(a v1'x + b) + cos(c v2'x + d) - shift` with
/// `v1 = (cos t, sin t)`, `v2 = (cos(t + pi/2), sin(t + pi/2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticFn2d {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub theta: f64,
    pub shift: f64,
}

impl Default for AnalyticFn2d {
    fn default() -> Self {
        AnalyticFn2d { a: 1.0, b: 0.0, c: 10.0, d: 0.0, theta: FRAC_PI_6, shift: 0.0 }
    }
}

impl AnalyticFn2d {
    /// Default parameters lowered by 1.5, which gives an excursion set
    /// `{f >= 0}` of area about 0.127 in the unit square.
    pub fn excursion_example() -> Self {
        AnalyticFn2d { shift: 1.5, ..Default::default() }
    }

    pub fn v1(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    pub fn v2(&self) -> [f64; 2] {
        let t = self.theta + FRAC_PI_2;
        [t.cos(), t.sin()]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let (v1, v2) = (self.v1(), self.v2());
        let s = v1[0] * x[0] + v1[1] * x[1];
        let t = v2[0] * x[0] + v2[1] * x[1];
        (self.a * s + self.b).sin() + (self.c * t + self.d).cos() - self.shift
    }

    pub fn grad(&self, x: &[f64]) -> [f64; 2] {
        let (v1, v2) = (self.v1(), self.v2());
        let s = v1[0] * x[0] + v1[1] * x[1];
        let t = v2[0] * x[0] + v2[1] * x[1];
        let p = self.a * (self.a * s + self.b).cos();
        let q = -self.c * (self.c * t + self.d).sin();
        [p * v1[0] + q * v2[0], p * v1[1] + q * v2[1]]
    }
}

/// `sin(a v1'x + b) + cos(c v2'x + d) + sin(e v3'x + f) - 1.5` with the
/// spherical frame of angles `theta`, `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticFn3d {
    pub coef: [f64; 6],
    pub theta: f64,
    pub phi: f64,
}

impl Default for AnalyticFn3d {
    fn default() -> Self {
        AnalyticFn3d { coef: [1.0, 0.0, 10.0, 0.0, 1.0, 0.0], theta: FRAC_PI_4, phi: FRAC_PI_4 }
    }
}

impl AnalyticFn3d {
    pub fn frame(&self) -> [[f64; 3]; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
    }

    fn parts(&self, x: &[f64]) -> ([f64; 3], [[f64; 3]; 3]) {
        let v = self.frame();
        let p = [0, 1, 2].map(|k| v[k][0] * x[0] + v[k][1] * x[1] + v[k][2] * x[2]);
        (p, v)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let [a, b, c, d, e, f] = self.coef;
        let (p, _) = self.parts(x);
        (a * p[0] + b).sin() + (c * p[1] + d).cos() + (e * p[2] + f).sin() - 1.5
    }

    pub fn grad(&self, x: &[f64]) -> [f64; 3] {
        let [a, b, c, d, e, f] = self.coef;
        let (p, v) = self.parts(x);
        let w = [a * (a * p[0] + b).cos(), -c * (c * p[1] + d).sin(), e * (e * p[2] + f).cos()];
        [0, 1, 2].map(|i| w[0] * v[0][i] + w[1] * v[1][i] + w[2] * v[2][i])
    }
}

/// Smooth 5-d surrogate on `[0,1]^5`: a quadratic ramp in `x1`, a
/// saturating rise in `x2`, a bump in `x3` and small ripples in `x4`, `x5`.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic5d {
    pub ramp: f64,
    pub saturation: f64,
    pub saturation_rate: f64,
    pub bump: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub ripple: f64,
    pub offset: f64,
}

impl Default for Synthetic5d {
    fn default() -> Self {
        Synthetic5d {
            ramp: 2.0,
            saturation: 1.5,
            saturation_rate: 3.0,
            bump: 0.5,
            bump_center: 0.5,
            bump_width: 0.2,
            ripple: 0.01,
            offset: 0.5,
        }
    }
}

impl Synthetic5d {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = (x[2] - self.bump_center) / self.bump_width;
        self.ramp * x[0] * x[0]
            + self.saturation * (1.0 - (-self.saturation_rate * x[1]).exp())
            + self.bump * (-u * u).exp()
            + self.ripple * (2.0 * PI * x[3]).sin()
            + self.ripple * (2.0 * PI * x[4]).cos()
            + self.offset
    }

    pub fn grad(&self, x: &[f64]) -> [f64; 5] {
        let u = (x[2] - self.bump_center) / self.bump_width;
        [
            2.0 * self.ramp * x[0],
            self.saturation * self.saturation_rate * (-self.saturation_rate * x[1]).exp(),
            -2.0 * u / self.bump_width * self.bump * (-u * u).exp(),
            2.0 * PI * self.ripple * (2.0 * PI * x[3]).cos(),
            -2.0 * PI * self.ripple * (2.0 * PI * x[4]).sin(),
        ]
    }
}

/// Registered test functions.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Analytic2d(AnalyticFn2d),
    Analytic3d(AnalyticFn3d),
    Synthetic5d(Synthetic5d),
}

impl TestFunction {
    pub const NAMES: [&'static str; 4] = ["analytic2d", "analytic2d-excursion", "analytic3d", "synthetic5d"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "analytic2d" => Ok(TestFunction::Analytic2d(AnalyticFn2d::default())),
            "analytic2d-excursion" => Ok(TestFunction::Analytic2d(AnalyticFn2d::excursion_example())),
            "analytic3d" => Ok(TestFunction::Analytic3d(AnalyticFn3d::default())),
            "synthetic5d" => Ok(TestFunction::Synthetic5d(Synthetic5d::default())),
            _ => Err(Error::invalid(format!(
                "unknown test function '{name}' (known: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Analytic2d(_) => 2,
            TestFunction::Analytic3d(_) => 3,
            TestFunction::Synthetic5d(_) => 5,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Analytic2d(f) => f.eval(x),
            TestFunction::Analytic3d(f) => f.eval(x),
            TestFunction::Synthetic5d(f) => f.eval(x),
        }
    }

    pub fn grad(&self, x: &[f64], g: &mut [f64]) {
        match self {
            TestFunction::Analytic2d(f) => g.copy_from_slice(&f.grad(x)),
            TestFunction::Analytic3d(f) => g.copy_from_slice(&f.grad(x)),
            TestFunction::Synthetic5d(f) => g.copy_from_slice(&f.grad(x)),
        }
    }
}

impl Objective for TestFunction {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        self.grad(x, g);
        true
    }
}

macro_rules! objective_impl {
    ($t:ty) => {
        impl Objective for $t {
            fn value(&self, x: &[f64]) -> f64 {
                self.eval(x)
            }
            fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
                g.copy_from_slice(&self.grad(x));
                true
            }
        }
    };
}
objective_impl!(AnalyticFn2d);
objective_impl!(AnalyticFn3d);
objective_impl!(Synthetic5d);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn check_grad(f: &TestFunction) {
        let mut rng = Stream::new(1);
        let d = f.dim();
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let mut g = vec![0.0; d];
            f.grad(&x, &mut g);
            for i in 0..d {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (f.eval(&a) - f.eval(&b)) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{f:?} {i}");
            }
        }
    }

    #[test]
    fn gradients() {
        for name in TestFunction::NAMES {
            check_grad(&TestFunction::by_name(name).unwrap());
        }
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(AnalyticFn2d::default().eval(&[0.0, 0.0]), 1.0);
        assert!((AnalyticFn3d::default().eval(&[0.0, 0.0, 0.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn directions_are_orthonormal() {
        let f = AnalyticFn2d::default();
        let (v1, v2) = (f.v1(), f.v2());
        assert!((v1[0] * v2[0] + v1[1] * v2[1]).abs() < 1e-15);
        let v = AnalyticFn3d::default().frame();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| v[i][k] * v[j][k]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn separable_along_generating_directions() {
        // First term is constant along v2, second along v1.
        let f = AnalyticFn2d::default();
        let (v1, v2) = (f.v1(), f.v2());
        let x = [0.3, 0.6];
        let g = f.grad(&x);
        let s = v1[0] * x[0] + v1[1] * x[1];
        let t = v2[0] * x[0] + v2[1] * x[1];
        assert!(((g[0] * v1[0] + g[1] * v1[1]) - s.cos()).abs() < 1e-14);
        assert!(((g[0] * v2[0] + g[1] * v2[1]) + 10.0 * (10.0 * t).sin()).abs() < 1e-13);
    }

    #[test]
    fn unknown_name() {
        assert!(TestFunction::by_name("branin").is_err());
    }
}
