//! Limited-memory BFGS with gradient projection for box constraints.

use std::collections::VecDeque;

use super::{eval_with_gradient, BoxDomain, Negated, Objective};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsbConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected-gradient infinity norm is at most
    /// `pgtol * max(1, |f|)`.
    pub pgtol: f64,
}

impl Default for LbfgsbConfig {
    fn default() -> Self {
        LbfgsbConfig { memory: 5, max_iter: 200, pgtol: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    /// The line search could not decrease the objective further.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

/// Feasible region seen by the quasi-Newton core.
pub(crate) trait Region {
    /// Largest step along `d` from `x` that stays feasible.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64;
    /// Marks coordinates that must not move (blocked bounds).
    fn blocked(&self, x: &[f64], g: &[f64], out: &mut [bool]);
    /// Restores feasibility after rounding.
    fn fix(&self, x: &mut [f64]);
    /// Bounds passed to finite differences.
    fn fd_bounds(&self) -> Option<&BoxDomain>;
}

impl Region for BoxDomain {
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut a = f64::INFINITY;
        for i in 0..x.len() {
            if d[i] > 0.0 {
                a = a.min((self.upper()[i] - x[i]) / d[i]);
            } else if d[i] < 0.0 {
                a = a.min((self.lower()[i] - x[i]) / d[i]);
            }
        }
        a.max(0.0)
    }

    fn blocked(&self, x: &[f64], g: &[f64], out: &mut [bool]) {
        for i in 0..x.len() {
            let at_lo = x[i] <= self.lower()[i];
            let at_hi = x[i] >= self.upper()[i];
            out[i] = (at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0);
        }
    }

    fn fix(&self, x: &mut [f64]) {
        self.clamp(x);
    }

    fn fd_bounds(&self) -> Option<&BoxDomain> {
        Some(self)
    }
}

/// Minimizes `obj` over `bounds` from `start`.
pub fn lbfgsb_minimize<O: Objective + ?Sized>(
    obj: &O,
    bounds: &BoxDomain,
    start: &[f64],
    cfg: &LbfgsbConfig,
) -> Result<OptimResult> {
    if start.len() != bounds.dim() {
        return Err(Error::invalid("start point dimension does not match the box"));
    }
    if !bounds.contains(start, 1e-12) {
        return Err(Error::invalid(format!("start point {start:?} outside the box")));
    }
    let mut x0 = start.to_vec();
    bounds.clamp(&mut x0);
    minimize_in(obj, bounds, x0, cfg)
}

/// Maximizes `obj` over `bounds` from `start`.
pub fn lbfgsb_maximize<O: Objective>(
    obj: &O,
    bounds: &BoxDomain,
    start: &[f64],
    cfg: &LbfgsbConfig,
) -> Result<OptimResult> {
    let mut r = lbfgsb_minimize(&Negated(obj), bounds, start, cfg)?;
    r.f = -r.f;
    Ok(r)
}

struct Evaluator<'a, O: ?Sized, R> {
    obj: &'a O,
    region: &'a R,
    count: usize,
}

impl<O: Objective + ?Sized, R: Region> Evaluator<'_, O, R> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        self.count += 1;
        let f = eval_with_gradient(self.obj, x, self.region.fd_bounds(), g);
        if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            f
        } else {
            f64::NAN
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fail(x: &[f64]) -> Error {
    Error::Optimizer { reason: "objective or gradient is not finite".into(), last: x.to_vec() }
}

pub(crate) fn minimize_in<O: Objective + ?Sized, R: Region>(
    obj: &O,
    region: &R,
    mut x: Vec<f64>,
    cfg: &LbfgsbConfig,
) -> Result<OptimResult> {
    let n = x.len();
    let mut ev = Evaluator { obj, region, count: 0 };
    let mut g = vec![0.0; n];
    let mut f = ev.eval(&x, &mut g);
    if !f.is_finite() {
        return Err(fail(&x));
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut blocked = vec![false; n];
    let mut d = vec![0.0; n];
    let mut alpha_buf = vec![0.0; cfg.memory];
    let mut gn = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut status = Status::MaxIterations;
    let mut iter = 0;
    let mut stall = 0;

    while iter < cfg.max_iter {
        region.blocked(&x, &g, &mut blocked);
        let pg = (0..n).filter(|&i| !blocked[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg <= cfg.pgtol * f.abs().max(1.0) {
            status = Status::Converged;
            break;
        }
        iter += 1;

        // Two-loop recursion on the free subspace.
        for i in 0..n {
            d[i] = if blocked[i] { 0.0 } else { -g[i] };
        }
        for (j, (s, y, rho)) in mem.iter().enumerate().rev() {
            let a = rho * masked_dot(s, &d, &blocked);
            alpha_buf[j] = a;
            axpy_masked(-a, y, &mut d, &blocked);
        }
        if let Some((s, y, _)) = mem.back() {
            let yy = masked_dot(y, y, &blocked);
            let sy = masked_dot(s, y, &blocked);
            if yy > 0.0 && sy > 0.0 {
                let gamma = sy / yy;
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for (j, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * masked_dot(y, &d, &blocked);
            axpy_masked(alpha_buf[j] - b, s, &mut d, &blocked);
        }
        // Coordinates already on a bound and pointing out stay put.
        let amax_raw = region.max_step(&x, &d);
        if amax_raw <= 0.0 {
            for i in 0..n {
                if d[i] != 0.0 {
                    let mut e = vec![0.0; n];
                    e[i] = d[i];
                    if region.max_step(&x, &e) <= 0.0 {
                        d[i] = 0.0;
                    }
                }
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            for i in 0..n {
                d[i] = if blocked[i] { 0.0 } else { -g[i] };
            }
            let amax = region.max_step(&x, &d);
            if amax <= 0.0 {
                for i in 0..n {
                    if d[i] != 0.0 {
                        let mut e = vec![0.0; n];
                        e[i] = d[i];
                        if region.max_step(&x, &e) <= 0.0 {
                            d[i] = 0.0;
                        }
                    }
                }
            }
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                status = Status::Converged;
                break;
            }
        }
        let amax = region.max_step(&x, &d);
        if amax <= 0.0 {
            status = Status::Stalled;
            break;
        }
        let a0 = if mem.is_empty() {
            let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (1.0 / dn.max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let ls = line_search(&mut ev, &x, f, &d, slope, a0.min(amax), amax, &mut xn, &mut gn)?;
        let Some(step) = ls else {
            if mem.is_empty() {
                status = Status::Stalled;
                break;
            }
            mem.clear();
            continue;
        };
        let fnew = step;
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let df = f - fnew;
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        f = fnew;
        if df <= 1e-15 * f.abs().max(1.0) {
            stall += 1;
            if stall >= 3 {
                status = Status::Stalled;
                break;
            }
        } else {
            stall = 0;
        }
    }
    Ok(OptimResult { x, f, iterations: iter, evaluations: ev.count, status })
}

fn masked_dot(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    (0..a.len()).filter(|&i| !mask[i]).map(|i| a[i] * b[i]).sum()
}

fn axpy_masked(a: f64, x: &[f64], y: &mut [f64], mask: &[bool]) {
    for i in 0..y.len() {
        if !mask[i] {
            y[i] += a * x[i];
        }
    }
}

/// Strong-Wolfe line search capped at `amax`.
///
/// On success writes the accepted point and gradient into `xn`/`gn` and
/// returns its value; returns `None` when no decrease was found.
#[allow(clippy::too_many_arguments)]
fn line_search<O: Objective + ?Sized, R: Region>(
    ev: &mut Evaluator<'_, O, R>,
    x: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    a_init: f64,
    amax: f64,
    xn: &mut [f64],
    gn: &mut [f64],
) -> Result<Option<f64>> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let n = x.len();
    let mut gt = vec![0.0; n];
    let mut xt = vec![0.0; n];

    let eval_at = |a: f64, xt: &mut [f64], gt: &mut [f64], ev: &mut Evaluator<'_, O, R>| {
        for i in 0..n {
            xt[i] = x[i] + a * d[i];
        }
        if a >= amax {
            // Land exactly on the blocking face.
            for i in 0..n {
                xt[i] = x[i] + amax * d[i];
            }
        }
        ev.region.fix(xt);
        let f = ev.eval(xt, gt);
        (f, dot(gt, d))
    };

    // Best Armijo point seen so far, used if the curvature test never holds.
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let keep = |f: f64, xt: &[f64], gt: &[f64], best: &mut Option<(f64, Vec<f64>, Vec<f64>)>| {
        if best.as_ref().is_none_or(|b| f < b.0) {
            *best = Some((f, xt.to_vec(), gt.to_vec()));
        }
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut s_prev = slope0;
    let mut a = a_init.min(amax);
    let (mut lo, mut hi, mut f_lo, mut s_lo, mut f_hi, mut s_hi) = (0.0, 0.0, f0, slope0, f0, slope0);
    let mut bracketed = false;
    let mut i = 0;
    loop {
        let (fa, sa) = eval_at(a, &mut xt, &mut gt, ev);
        if !fa.is_finite() {
            return Err(fail(x));
        }
        if fa > f0 + C1 * a * slope0 || (i > 0 && fa >= f_prev) {
            lo = a_prev;
            f_lo = f_prev;
            s_lo = s_prev;
            hi = a;
            f_hi = fa;
            s_hi = sa;
            bracketed = true;
            break;
        }
        keep(fa, &xt, &gt, &mut best);
        if sa.abs() <= -C2 * slope0 || a >= amax {
            xn.copy_from_slice(&xt);
            gn.copy_from_slice(&gt);
            return Ok(Some(fa));
        }
        if sa >= 0.0 {
            lo = a;
            f_lo = fa;
            s_lo = sa;
            hi = a_prev;
            f_hi = f_prev;
            s_hi = s_prev;
            bracketed = true;
            break;
        }
        a_prev = a;
        f_prev = fa;
        s_prev = sa;
        a = (4.0 * a).min(amax);
        i += 1;
        if i > 40 {
            break;
        }
    }

    // Zoom.
    if bracketed {
        for _ in 0..40 {
            let width = (hi - lo).abs();
            if width <= 1e-16 * lo.abs().max(hi.abs()).max(1e-300) {
                break;
            }
            let mut a = cubic_min(lo, f_lo, s_lo, hi, f_hi, s_hi);
            let (a_min, a_max) = (lo.min(hi), lo.max(hi));
            if !(a > a_min + 0.1 * width && a < a_max - 0.1 * width) {
                a = 0.5 * (lo + hi);
            }
            let (fa, sa) = eval_at(a, &mut xt, &mut gt, ev);
            if !fa.is_finite() {
                return Err(fail(x));
            }
            if fa > f0 + C1 * a * slope0 || fa >= f_lo {
                hi = a;
                f_hi = fa;
                s_hi = sa;
            } else {
                keep(fa, &xt, &gt, &mut best);
                if sa.abs() <= -C2 * slope0 {
                    xn.copy_from_slice(&xt);
                    gn.copy_from_slice(&gt);
                    return Ok(Some(fa));
                }
                if sa * (hi - lo) >= 0.0 {
                    hi = lo;
                    f_hi = f_lo;
                    s_hi = s_lo;
                }
                lo = a;
                f_lo = fa;
                s_lo = sa;
            }
        }
    }
    match best {
        Some((fb, xb, gb)) if fb < f0 => {
            xn.copy_from_slice(&xb);
            gn.copy_from_slice(&gb);
            Ok(Some(fb))
        }
        _ => Ok(None),
    }
}

/// Minimizer of the cubic interpolating values and slopes at `a` and `b`.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return f64::NAN;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{FnGradObjective, FnObjective};

    #[test]
    fn interior_quadratic() {
        let f = FnObjective(|x: &[f64]| -x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>());
        let b = BoxDomain::unit(4);
        let r = lbfgsb_maximize(&f, &b, &[0.1, 0.9, 0.0, 1.0], &LbfgsbConfig::default()).unwrap();
        for v in &r.x {
            assert!((v - 0.5).abs() < 1e-6);
        }
        assert!(r.f.abs() < 1e-10);
    }

    #[test]
    fn linear_hits_bound() {
        let f = FnObjective(|x: &[f64]| x[0]);
        let b = BoxDomain::unit(2);
        let r = lbfgsb_maximize(&f, &b, &[0.2, 0.3], &LbfgsbConfig::default()).unwrap();
        assert_eq!(r.x[0], 1.0);
        assert_eq!(r.status, Status::Converged);
    }

    #[test]
    fn rosenbrock_with_active_bound() {
        let f = FnGradObjective {
            f: |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            grad: |x: &[f64], g: &mut [f64]| {
                g[0] = -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
            },
        };
        let b = BoxDomain::new(vec![-2.0, -2.0], vec![0.5, 2.0]).unwrap();
        let r = lbfgsb_minimize(&f, &b, &[-1.2, 1.0], &LbfgsbConfig::default()).unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-8 && (r.x[1] - 0.25).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let f = FnObjective(|x: &[f64]| if x[0] > 0.6 { f64::NAN } else { x[0] });
        let b = BoxDomain::unit(1);
        match lbfgsb_maximize(&f, &b, &[0.5], &LbfgsbConfig::default()) {
            Err(Error::Optimizer { last, .. }) => assert!(last[0] <= 0.6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn never_worse_than_start() {
        let f = FnObjective(|x: &[f64]| (8.0 * x[0]).sin() * (5.0 * x[1]).cos());
        let b = BoxDomain::unit(2);
        for s in [[0.1, 0.1], [0.9, 0.4], [0.5, 0.5], [0.0, 1.0]] {
            let r = lbfgsb_maximize(&f, &b, &s, &LbfgsbConfig::default()).unwrap();
            assert!(r.f >= f.value(&s) - 1e-12);
            assert!(b.contains(&r.x, 0.0));
        }
    }
}
