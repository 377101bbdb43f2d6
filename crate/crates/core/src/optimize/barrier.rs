//! Maximization over a fiber `{x in box : Psi' x = eta}` with a logarithmic
//! barrier on the box faces, in null-space coordinates `x = xi + N z`.

use nalgebra::{DMatrix, DVector};

use super::lbfgsb::{minimize_in, LbfgsbConfig, Region};
use super::projection::EqualityFiber;
use super::{eval_with_gradient, spread_starts, BoxDomain, Objective};
use crate::error::Result;
use crate::linalg::orthogonal_complement;
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq)]
pub struct FiberConfig {
    pub n_starts: usize,
    /// Decreasing barrier weights, relative to the objective scale.
    pub barrier_weights: Vec<f64>,
    pub inner: LbfgsbConfig,
    /// Random fiber points scored before choosing the random starts.
    pub scan: usize,
    pub seed: u64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            n_starts: 5,
            barrier_weights: vec![1e-2, 1e-4, 1e-6],
            inner: LbfgsbConfig { memory: 5, max_iter: 200, pgtol: 1e-6 },
            scan: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FiberOptimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Index of the start that produced the returned point.
    pub start: usize,
}

/// Affine slice `xi + basis * z` with barrier terms on `faces`.
struct Slice<'a> {
    xi: Vec<f64>,
    basis: DMatrix<f64>,
    faces: Vec<usize>,
    bounds: &'a BoxDomain,
}

impl Slice<'_> {
    fn point(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.xi.clone();
        for (k, zk) in z.iter().enumerate() {
            if *zk != 0.0 {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += self.basis[(i, k)] * zk;
                }
            }
        }
        x
    }

    fn direction(&self, d: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.xi.len()];
        for (k, dk) in d.iter().enumerate() {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += self.basis[(i, k)] * dk;
            }
        }
        v
    }

    /// Largest step from `z` along `d` before some face is reached.
    fn step_to_boundary(&self, z: &[f64], d: &[f64]) -> f64 {
        let x = self.point(z);
        let v = self.direction(d);
        let mut a = f64::INFINITY;
        for &i in &self.faces {
            if v[i] > 0.0 {
                a = a.min((self.bounds.upper()[i] - x[i]) / v[i]);
            } else if v[i] < 0.0 {
                a = a.min((self.bounds.lower()[i] - x[i]) / v[i]);
            }
        }
        a.max(0.0)
    }

    fn min_slack(&self, x: &[f64]) -> f64 {
        self.faces
            .iter()
            .map(|&i| (x[i] - self.bounds.lower()[i]).min(self.bounds.upper()[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

struct BarrierRegion<'a, 'b>(&'a Slice<'b>);

impl Region for BarrierRegion<'_, '_> {
    fn max_step(&self, z: &[f64], d: &[f64]) -> f64 {
        0.995 * self.0.step_to_boundary(z, d)
    }
    fn blocked(&self, _: &[f64], _: &[f64], out: &mut [bool]) {
        out.iter_mut().for_each(|b| *b = false);
    }
    fn fix(&self, _: &mut [f64]) {}
    fn fd_bounds(&self) -> Option<&BoxDomain> {
        None
    }
}

/// `-gamma(xi + N z) - mu * sum log(slacks)`.
struct BarrierObjective<'a, 'b, O: ?Sized> {
    obj: &'a O,
    slice: &'a Slice<'b>,
    mu: f64,
}

impl<O: Objective + ?Sized> Objective for BarrierObjective<'_, '_, O> {
    fn value(&self, z: &[f64]) -> f64 {
        let mut g = vec![0.0; z.len()];
        self.value_and_gradient(z, &mut g).unwrap_or(f64::NAN)
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) -> bool {
        self.value_and_gradient(z, g).is_some()
    }

    fn value_and_gradient(&self, z: &[f64], g: &mut [f64]) -> Option<f64> {
        let s = self.slice;
        let x = s.point(z);
        let lo = s.bounds.lower();
        let hi = s.bounds.upper();
        let mut bar = 0.0;
        let mut gx = vec![0.0; x.len()];
        for &i in &s.faces {
            let a = x[i] - lo[i];
            let b = hi[i] - x[i];
            if !(a > 0.0 && b > 0.0) {
                g.iter_mut().for_each(|v| *v = 0.0);
                return Some(1e300);
            }
            bar -= a.ln() + b.ln();
            gx[i] = -self.mu * (1.0 / a - 1.0 / b);
        }
        let mut gg = vec![0.0; x.len()];
        let f = eval_with_gradient(self.obj, &x, Some(s.bounds), &mut gg);
        for i in 0..x.len() {
            gx[i] -= gg[i];
        }
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (0..x.len()).map(|i| s.basis[(i, k)] * gx[i]).sum();
        }
        Some(-f + self.mu * bar)
    }
}

/// Maximizes `obj` over the fiber, from several strictly interior starts.
///
/// Starts, in order: `warm` projected onto the fiber (if given), the
/// max-slack point `xi`, then random interior points. When `cfg.scan > 0`
/// the random starts are the best-scoring of `cfg.scan` random points.
/// Among results within `1e-10` of the best, the lowest start index wins.
pub fn constrained_maximize<O: Objective + ?Sized>(
    obj: &O,
    fiber: &EqualityFiber,
    bounds: &BoxDomain,
    warm: Option<&[f64]>,
    cfg: &FiberConfig,
) -> Result<FiberOptimum> {
    if fiber.is_single_point() {
        let f = obj.value(&fiber.xi);
        return Ok(FiberOptimum { x: fiber.xi.clone(), f, start: 0 });
    }
    let faces: Vec<usize> = (0..bounds.dim()).filter(|i| !fiber.pinned.contains(i)).collect();
    let slice = Slice { xi: fiber.xi.clone(), basis: fiber.basis.clone(), faces, bounds };
    let starts = start_points(obj, &slice, fiber, warm, cfg);

    let scale = starts
        .iter()
        .map(|z| obj.value(&slice.point(z)).abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12);

    let mut best: Option<FiberOptimum> = None;
    for (k, z0) in starts.iter().enumerate() {
        let cand = solve_from(obj, &slice, z0.clone(), scale, cfg)?;
        let better = match &best {
            None => true,
            Some(b) => cand.1 > b.f + 1e-10 * b.f.abs().max(1.0),
        };
        if better {
            best = Some(FiberOptimum { x: cand.0, f: cand.1, start: k });
        }
    }
    Ok(best.expect("at least one start"))
}

fn solve_from<O: Objective + ?Sized>(
    obj: &O,
    slice: &Slice<'_>,
    z0: Vec<f64>,
    scale: f64,
    cfg: &FiberConfig,
) -> Result<(Vec<f64>, f64)> {
    let x_start = slice.point(&z0);
    let f_start = obj.value(&x_start);
    let mut z = z0;
    for &w in &cfg.barrier_weights {
        let mu = w * scale;
        let bo = BarrierObjective { obj, slice, mu };
        let r = minimize_in(&bo, &BarrierRegion(slice), z, &cfg.inner)?;
        z = r.x;
    }
    let mut x = slice.point(&z);
    slice.bounds.clamp(&mut x);
    let mut f = obj.value(&x);

    if near_faces(slice, &x).is_empty() {
        // Interior solution: remove the residual barrier bias.
        let bo = BarrierObjective { obj, slice, mu: 0.0 };
        let polish = LbfgsbConfig { pgtol: 1e-10, max_iter: 50, ..cfg.inner.clone() };
        let r = minimize_in(&bo, &BarrierRegion(slice), z, &polish)?;
        let mut xp = slice.point(&r.x);
        slice.bounds.clamp(&mut xp);
        let fp = obj.value(&xp);
        if fp >= f {
            x = xp;
            f = fp;
        }
    } else if let Some((xs, fs)) = snap_to_faces(obj, slice, &x, f, cfg)? {
        x = xs;
        f = fs;
    }
    if f_start > f {
        return Ok((x_start, f_start));
    }
    Ok((x, f))
}

/// Moves the barrier solution onto faces it is nearly touching and
/// re-optimizes within that face. Returns the new point if it is better.
fn snap_to_faces<O: Objective + ?Sized>(
    obj: &O,
    slice: &Slice<'_>,
    x: &[f64],
    f: f64,
    cfg: &FiberConfig,
) -> Result<Option<(Vec<f64>, f64)>> {
    let b = slice.bounds;
    let near = near_faces(slice, x);
    if near.is_empty() {
        return Ok(None);
    }
    let k = slice.basis.ncols();
    let rows = DMatrix::from_fn(near.len(), k, |r, c| slice.basis[(near[r].0, c)]);
    let rhs = DVector::from_iterator(near.len(), near.iter().map(|(i, t)| t - x[*i]));
    let svd = rows.clone().svd(true, true);
    let Ok(dz) = svd.solve(&rhs, 1e-12) else { return Ok(None) };
    let mut xs = x.to_vec();
    for i in 0..xs.len() {
        xs[i] += (0..k).map(|c| slice.basis[(i, c)] * dz[c]).sum::<f64>();
    }
    if !b.contains(&xs, 1e-12) {
        return Ok(None);
    }
    b.clamp(&mut xs);
    for (i, t) in &near {
        xs[*i] = *t;
    }
    let fs = obj.value(&xs);
    if !(fs.is_finite() && fs >= f) {
        return Ok(None);
    }
    let (mut xb, mut fb) = (xs.clone(), fs);

    // Free directions left on the face.
    let span: Vec<DVector<f64>> = (0..near.len()).map(|r| rows.row(r).transpose()).collect();
    let comp = orthogonal_complement(&span, k);
    if comp.ncols() > 0 {
        let faces: Vec<usize> =
            slice.faces.iter().copied().filter(|i| !near.iter().any(|(j, _)| j == i)).collect();
        let face = Slice { xi: xs.clone(), basis: &slice.basis * comp, faces, bounds: b };
        if face.min_slack(&xs) > 0.0 {
            let bo = BarrierObjective { obj, slice: &face, mu: 0.0 };
            let r = minimize_in(&bo, &BarrierRegion(&face), vec![0.0; face.basis.ncols()], &cfg.inner)?;
            let mut xf = face.point(&r.x);
            b.clamp(&mut xf);
            for (i, t) in &near {
                xf[*i] = *t;
            }
            let ff = obj.value(&xf);
            if ff > fb {
                xb = xf;
                fb = ff;
            }
        }
    }
    Ok(Some((xb, fb)))
}

/// Faces within `1e-4` of their width from `x`, with the face value.
fn near_faces(slice: &Slice<'_>, x: &[f64]) -> Vec<(usize, f64)> {
    let b = slice.bounds;
    let mut near = Vec::new();
    for &i in &slice.faces {
        let w = b.width(i);
        if x[i] - b.lower()[i] < 1e-4 * w {
            near.push((i, b.lower()[i]));
        } else if b.upper()[i] - x[i] < 1e-4 * w {
            near.push((i, b.upper()[i]));
        }
    }
    near
}

fn start_points<O: Objective + ?Sized>(
    obj: &O,
    slice: &Slice<'_>,
    fiber: &EqualityFiber,
    warm: Option<&[f64]>,
    cfg: &FiberConfig,
) -> Vec<Vec<f64>> {
    let k = slice.basis.ncols();
    let n = cfg.n_starts.max(1);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let center_slack = slice.min_slack(&slice.xi);
    let keep = 1e-3 * center_slack;

    if let Some(w) = warm {
        let zw = fiber.coords(w);
        // Pull towards the interior point until the slacks are comfortable.
        let mut theta = 1.0;
        for _ in 0..60 {
            let z: Vec<f64> = zw.iter().map(|v| v * theta).collect();
            if slice.min_slack(&slice.point(&z)) > keep {
                break;
            }
            theta *= 0.9;
        }
        starts.push(zw.iter().map(|v| v * theta).collect());
    }
    if starts.len() < n {
        starts.push(vec![0.0; k]);
    }

    let mut rng = Stream::new(cfg.seed);
    let random_point = |rng: &mut Stream| -> Vec<f64> {
        let mut u: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        u.iter_mut().for_each(|v| *v /= nu);
        let amax = slice.step_to_boundary(&vec![0.0; k], &u);
        let t = if amax.is_finite() { amax * rng.uniform_in(0.02, 0.98) } else { rng.uniform() };
        u.iter().map(|v| v * t).collect()
    };
    let missing = n.saturating_sub(starts.len());
    if cfg.scan > 0 && missing > 0 {
        let pool: Vec<(f64, usize, Vec<f64>)> = (0..cfg.scan.max(missing))
            .map(|j| {
                let z = random_point(&mut rng);
                let v = obj.value(&slice.point(&z));
                (if v.is_finite() { v } else { f64::NEG_INFINITY }, j, z)
            })
            .collect();
        starts.extend(spread_starts(pool, missing - missing / 2));
        for _ in 0..missing / 2 {
            starts.push(random_point(&mut rng));
        }
    } else {
        for _ in 0..missing {
            starts.push(random_point(&mut rng));
        }
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{FnObjective, Projection};

    #[test]
    fn constant_objective() {
        let f = FnObjective(|_: &[f64]| 3.5);
        let b = BoxDomain::unit(3);
        let p = Projection::oblique(&[1.0, 2.0, 0.5]).unwrap();
        let fib = EqualityFiber::new(&p, &[1.0], &b).unwrap();
        let r = constrained_maximize(&f, &fib, &b, None, &FiberConfig::default()).unwrap();
        assert_eq!(r.f, 3.5);
    }

    #[test]
    fn boundary_maximum_is_exact() {
        let f = FnObjective(|x: &[f64]| x[1]);
        let b = BoxDomain::unit(2);
        let p = Projection::coordinate(2, 0).unwrap();
        for eta in [0.0, 0.3, 1.0] {
            let fib = EqualityFiber::new(&p, &[eta], &b).unwrap();
            let r = constrained_maximize(&f, &fib, &b, None, &FiberConfig::default()).unwrap();
            assert_eq!(r.f, 1.0);
            assert!((r.x[0] - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn oblique_fiber_of_smooth_function() {
        // max of -(x-0.8)^2 - (y-0.1)^2 on x + y = 1: at (0.85, 0.15).
        let f = FnObjective(|x: &[f64]| -(x[0] - 0.8).powi(2) - (x[1] - 0.1).powi(2));
        let b = BoxDomain::unit(2);
        let p = Projection::oblique(&[1.0, 1.0]).unwrap();
        let eta = 1.0 / 2f64.sqrt();
        let fib = EqualityFiber::new(&p, &[eta], &b).unwrap();
        let r = constrained_maximize(&f, &fib, &b, None, &FiberConfig::default()).unwrap();
        assert!((r.x[0] - 0.85).abs() < 1e-6 && (r.x[1] - 0.15).abs() < 1e-6, "{:?}", r.x);
        assert!((p.project(&r.x)[0] - eta).abs() < 1e-12);
    }

    #[test]
    fn corner_maximum_on_two_dimensional_fiber() {
        let f = FnObjective(|x: &[f64]| x[1] + 2.0 * x[2]);
        let b = BoxDomain::unit(3);
        let p = Projection::coordinate(3, 0).unwrap();
        let fib = EqualityFiber::new(&p, &[0.4], &b).unwrap();
        let r = constrained_maximize(&f, &fib, &b, None, &FiberConfig::default()).unwrap();
        assert!((r.f - 3.0).abs() < 1e-12, "{}", r.f);
    }
}
