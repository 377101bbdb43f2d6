//! Bound-constrained quasi-Newton optimization, linear programs for fiber
//! points, and barrier maximization over projection fibers.

mod barrier;
mod lbfgsb;
mod lp;
mod projection;

pub use barrier::{constrained_maximize, FiberConfig, FiberOptimum};
pub use lbfgsb::{lbfgsb_maximize, lbfgsb_minimize, LbfgsbConfig, OptimResult, Status};
pub use lp::{LinearProgram, LpSolution};
pub use projection::{lp_feasible_point, null_space, EqualityFiber, Projection, ProjectionKind};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!("invalid box side [{l}, {u}]")));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn unit(d: usize) -> Self {
        BoxDomain { lower: vec![0.0; d], upper: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Box with coordinate `i` removed.
    pub fn without(&self, i: usize) -> Option<BoxDomain> {
        if self.dim() < 2 {
            return None;
        }
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower.remove(i);
        upper.remove(i);
        Some(BoxDomain { lower, upper })
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }
}

/// A scalar function with an optional analytic gradient.
///
/// Objectives are shared across worker threads during profile sweeps.
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `g` and returns `true`, or returns `false`
    /// when no analytic gradient is available.
    fn gradient(&self, _x: &[f64], _g: &mut [f64]) -> bool {
        false
    }

    /// Value and gradient together; `None` when there is no analytic
    /// gradient. Override when both share work.
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        if self.gradient(x, g) {
            Some(self.value(x))
        } else {
            None
        }
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        (**self).gradient(x, g)
    }
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        (**self).value_and_gradient(x, g)
    }
}

/// Closure objective without gradient.
pub struct FnObjective<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Closure objective with analytic gradient.
pub struct FnGradObjective<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> Objective for FnGradObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        (self.grad)(x, g);
        true
    }
}

/// `-f`, used to turn infima into suprema.
pub struct Negated<O>(pub O);

impl<O: Objective> Objective for Negated<O> {
    fn value(&self, x: &[f64]) -> f64 {
        -self.0.value(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        if self.0.gradient(x, g) {
            g.iter_mut().for_each(|v| *v = -*v);
            true
        } else {
            false
        }
    }
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        let v = self.0.value_and_gradient(x, g)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Some(-v)
    }
}

/// Picks `count` starts from scored random points `(value, index, z)`:
/// best value first, skipping points closer than a fraction of the pool's
/// bounding-box diagonal to a start already taken, so the starts do not
/// all fall into one basin. Skipped points fill any shortfall.
pub(crate) fn spread_starts(mut pool: Vec<(f64, usize, Vec<f64>)>, count: usize) -> Vec<Vec<f64>> {
    if pool.is_empty() || count == 0 {
        return Vec::new();
    }
    pool.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let k = pool[0].2.len();
    let diag = (0..k)
        .map(|j| {
            let (lo, hi) = pool.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.2[j]), b.max(p.2[j])));
            (hi - lo).powi(2)
        })
        .fold(0.0, |a, b| a + b)
        .sqrt();
    let radius = 0.5 * diag / count as f64;
    let mut taken: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut skipped = Vec::new();
    for (_, _, z) in pool {
        if taken.len() == count {
            break;
        }
        let far = taken.iter().all(|t| t.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= radius);
        if far {
            taken.push(z);
        } else {
            skipped.push(z);
        }
    }
    let short = count - taken.len();
    taken.extend(skipped.into_iter().take(short));
    taken
}

/// Central-difference gradient with step `1e-6 max(1, |x_i|)`, one-sided
/// when the central stencil would leave `[lower, upper]`.
pub fn numeric_gradient<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    f0: f64,
    bounds: Option<&BoxDomain>,
    g: &mut [f64],
) {
    let mut xt = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let (lo, hi) = match bounds {
            Some(b) => (b.lower[i], b.upper[i]),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let fwd_ok = x[i] + h <= hi;
        let bwd_ok = x[i] - h >= lo;
        g[i] = if fwd_ok && bwd_ok {
            xt[i] = x[i] + h;
            let fp = obj.value(&xt);
            xt[i] = x[i] - h;
            let fm = obj.value(&xt);
            (fp - fm) / (2.0 * h)
        } else if fwd_ok {
            xt[i] = x[i] + h;
            (obj.value(&xt) - f0) / h
        } else if bwd_ok {
            xt[i] = x[i] - h;
            (f0 - obj.value(&xt)) / h
        } else {
            0.0
        };
        xt[i] = x[i];
    }
}

/// Value and gradient, falling back to finite differences.
pub fn eval_with_gradient<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    bounds: Option<&BoxDomain>,
    g: &mut [f64],
) -> f64 {
    match obj.value_and_gradient(x, g) {
        Some(v) => v,
        None => {
            let f0 = obj.value(x);
            if f0.is_finite() {
                numeric_gradient(obj, x, f0, bounds, g);
            }
            f0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_starts_leave_the_best_basin() {
        // Values favor points near 0; the second start must come from afar.
        let pool: Vec<(f64, usize, Vec<f64>)> =
            (0..11).map(|j| (-(j as f64), j, vec![j as f64 / 10.0])).collect();
        let s = spread_starts(pool, 2);
        assert_eq!(s[0], vec![0.0]);
        assert!(s[1][0] >= 0.25, "{s:?}");
        let one = spread_starts(vec![(1.0, 0, vec![0.5])], 3);
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn box_validation() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let b = BoxDomain::unit(2);
        assert!(b.contains(&[0.0, 1.0], 0.0));
        assert!(!b.contains(&[0.0, 1.1], 1e-9));
    }

    #[test]
    fn numeric_gradient_one_sided_at_edges() {
        let f = FnObjective(|x: &[f64]| x[0] * x[0] + 3.0 * x[1]);
        let b = BoxDomain::unit(2);
        let mut g = [0.0; 2];
        numeric_gradient(&f, &[1.0, 0.0], f.value(&[1.0, 0.0]), Some(&b), &mut g);
        assert!((g[0] - 2.0).abs() < 1e-5);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn negation_flips_gradient() {
        let f = FnGradObjective { f: |x: &[f64]| x[0], grad: |_: &[f64], g: &mut [f64]| g[0] = 1.0 };
        let n = Negated(&f);
        let mut g = [0.0];
        assert_eq!(n.value_and_gradient(&[2.0], &mut g), Some(-2.0));
        assert_eq!(g[0], -1.0);
    }
}
