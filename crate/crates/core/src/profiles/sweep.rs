//! Exact profile extrema by repeated fiber optimization.

use rayon::prelude::*;

use super::{ProfileConfig, ProfileCurve, ProfileGrid, ProfileMap, Provenance};
use crate::error::{Error, Result};
use crate::optimize::{
    constrained_maximize, lbfgsb_maximize, spread_starts, BoxDomain, EqualityFiber, FiberConfig, Negated, Objective,
    Projection, ProjectionKind,
};
use crate::rng::{derive_seed, Stream};

/// Maximizer of the objective over one fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeOptimum {
    pub x: Vec<f64>,
    pub f: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Route {
    /// Fix the coordinate and optimize the others in their box.
    Coordinate(usize),
    /// As above with two coordinates, in the order of the columns.
    CoordinatePair(usize, usize),
    /// Null-space parametrization with a barrier.
    Fiber,
}

/// Index of the unit coordinate vector in column `k`, if it is one.
fn unit_column(proj: &Projection, k: usize) -> Option<usize> {
    let c = proj.psi().column(k);
    let nz: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
    (nz.len() == 1 && c[nz[0]] == 1.0).then(|| nz[0])
}

fn route_for(proj: &Projection) -> Route {
    match proj.kind() {
        ProjectionKind::Coordinate(i) => Route::Coordinate(i),
        ProjectionKind::Planar => match (unit_column(proj, 0), unit_column(proj, 1)) {
            (Some(i), Some(j)) => Route::CoordinatePair(i, j),
            _ => Route::Fiber,
        },
        _ => Route::Fiber,
    }
}

/// `obj` with some coordinates frozen; the free ones keep their order.
struct Fixed<'a, O: ?Sized> {
    obj: &'a O,
    /// `(coordinate, value)` sorted by coordinate.
    fixed: Vec<(usize, f64)>,
}

impl<O: Objective + ?Sized> Fixed<'_, O> {
    fn full(&self, z: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(z.len() + self.fixed.len());
        let mut free = z.iter();
        let mut fixed = self.fixed.iter().peekable();
        for i in 0..z.len() + self.fixed.len() {
            match fixed.peek() {
                Some(&&(j, v)) if j == i => {
                    x.push(v);
                    fixed.next();
                }
                _ => x.push(*free.next().expect("free coordinate")),
            }
        }
        x
    }

    fn reduce(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().filter(|(i, _)| !self.is_fixed(*i)).map(|(_, v)| *v).collect()
    }

    fn is_fixed(&self, i: usize) -> bool {
        self.fixed.iter().any(|(j, _)| *j == i)
    }
}

impl<O: Objective + ?Sized> Objective for Fixed<'_, O> {
    fn value(&self, z: &[f64]) -> f64 {
        self.obj.value(&self.full(z))
    }
    fn value_and_gradient(&self, z: &[f64], g: &mut [f64]) -> Option<f64> {
        let x = self.full(z);
        let mut gx = vec![0.0; x.len()];
        let v = self.obj.value_and_gradient(&x, &mut gx)?;
        g.copy_from_slice(&self.reduce(&gx));
        Some(v)
    }
}

fn better(f: f64, best: f64) -> bool {
    f > best + 1e-10 * best.abs().max(1.0)
}

/// Free dimensions up to which sub-box vertices join the start scan.
const MAX_VERTEX_DIM: usize = 6;

#[allow(clippy::too_many_arguments)]
fn coordinate_sup<O: Objective + ?Sized>(
    obj: &O,
    idx: &[usize],
    bounds: &BoxDomain,
    eta: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
    n_starts: usize,
    cfg: &ProfileConfig,
) -> Result<NodeOptimum> {
    let mut fixed = Vec::with_capacity(idx.len());
    for (&i, &e) in idx.iter().zip(eta) {
        let tol = 1e-12 * bounds.width(i);
        if e < bounds.lower()[i] - tol || e > bounds.upper()[i] + tol {
            return Err(Error::Infeasible(format!("coordinate {i} value {e} outside the box")));
        }
        fixed.push((i, e.clamp(bounds.lower()[i], bounds.upper()[i])));
    }
    fixed.sort_by_key(|f| f.0);
    let red = Fixed { obj, fixed };
    let (lo, hi): (Vec<f64>, Vec<f64>) = (red.reduce(bounds.lower()), red.reduce(bounds.upper()));
    if lo.is_empty() {
        return Err(Error::invalid("profiles need d > p"));
    }
    let sub = BoxDomain::new(lo, hi)?;
    let k = sub.dim();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts);
    if let Some(w) = warm {
        let mut z = red.reduce(w);
        sub.clamp(&mut z);
        starts.push(z);
    }
    if starts.len() < n_starts {
        starts.push(sub.center());
    }
    let mut rng = Stream::new(seed);
    let missing = n_starts.saturating_sub(starts.len());
    let draw = |rng: &mut Stream| -> Vec<f64> {
        (0..k).map(|j| rng.uniform_in(sub.lower()[j], sub.upper()[j])).collect()
    };
    if cfg.scan > 0 && missing > 0 {
        let mut cands: Vec<Vec<f64>> = (0..cfg.scan.max(missing)).map(|_| draw(&mut rng)).collect();
        // Optima on low-dimensional boxes often sit at a vertex, which random
        // points rarely come close to.
        if k <= MAX_VERTEX_DIM {
            cands.extend((0..1usize << k).map(|m| {
                (0..k).map(|j| if m >> j & 1 == 1 { sub.upper()[j] } else { sub.lower()[j] }).collect()
            }));
        }
        let pool: Vec<(f64, usize, Vec<f64>)> = cands
            .into_iter()
            .enumerate()
            .map(|(j, z)| {
                let v = red.value(&z);
                (if v.is_finite() { v } else { f64::NEG_INFINITY }, j, z)
            })
            .collect();
        starts.extend(spread_starts(pool, missing - missing / 2));
        for _ in 0..missing / 2 {
            starts.push(draw(&mut rng));
        }
    } else {
        for _ in 0..missing {
            starts.push(draw(&mut rng));
        }
    }

    let mut best: Option<NodeOptimum> = None;
    for z0 in &starts {
        let r = lbfgsb_maximize(&red, &sub, z0, &cfg.lbfgsb)?;
        if best.as_ref().is_none_or(|b| better(r.f, b.f)) {
            best = Some(NodeOptimum { x: red.full(&r.x), f: r.f });
        }
    }
    Ok(best.expect("at least one start"))
}

fn fiber_sup<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    eta: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
    n_starts: usize,
    cfg: &ProfileConfig,
) -> Result<NodeOptimum> {
    let fiber = EqualityFiber::new(proj, eta, bounds)?;
    let fc = FiberConfig { n_starts, seed, scan: cfg.scan, ..cfg.fiber.clone() };
    let r = constrained_maximize(obj, &fiber, bounds, warm, &fc)?;
    Ok(NodeOptimum { x: r.x, f: r.f })
}

fn node_sup<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    route: Route,
    bounds: &BoxDomain,
    eta: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
    cfg: &ProfileConfig,
) -> Result<NodeOptimum> {
    let n = cfg.starts_for(proj.p()).max(1);
    match route {
        Route::Coordinate(i) => coordinate_sup(obj, &[i], bounds, eta, warm, seed, n, cfg),
        Route::CoordinatePair(i, j) => coordinate_sup(obj, &[i, j], bounds, eta, warm, seed, n, cfg),
        Route::Fiber => fiber_sup(obj, proj, bounds, eta, warm, seed, n, cfg),
    }
    .map_err(|e| e.at_node(eta))
}

/// `sup {obj(x) : Psi' x = eta, x in bounds}` for a single node.
///
/// Coordinate projections (and pairs of coordinates) fix those coordinates
/// and run bound-constrained quasi-Newton on the rest; other projections go
/// through the null-space barrier solver.
pub fn sup_at<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    eta: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
    cfg: &ProfileConfig,
) -> Result<NodeOptimum> {
    check_dims(proj, bounds)?;
    node_sup(obj, proj, route_for(proj), bounds, eta, warm, seed, cfg)
}

fn check_dims(proj: &Projection, bounds: &BoxDomain) -> Result<()> {
    if proj.d() != bounds.dim() {
        return Err(Error::invalid(format!(
            "projection acts on R^{} but the box has dimension {}",
            proj.d(),
            bounds.dim()
        )));
    }
    Ok(())
}

struct NodeOut {
    sup: Option<NodeOptimum>,
    inf: Option<NodeOptimum>,
}

/// Runs one warm-started chain over `nodes` (indices into `grid`). In
/// lenient mode a failing node is left empty and the chain restarts cold.
#[allow(clippy::too_many_arguments)]
fn run_chain<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    route: Route,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    nodes: &[usize],
    cfg: &ProfileConfig,
    lenient: bool,
) -> Result<Vec<NodeOut>> {
    let neg = Negated(obj);
    let mut warm_sup: Option<Vec<f64>> = None;
    let mut warm_inf: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(nodes.len());
    for &k in nodes {
        if !grid.feasible[k] {
            out.push(NodeOut { sup: None, inf: None });
            continue;
        }
        let eta = &grid.etas[k];
        let mut sup = None;
        if cfg.extrema.sup() {
            let seed = derive_seed(cfg.seed, 2 * k as u64);
            match node_sup(obj, proj, route, bounds, eta, warm_sup.as_deref(), seed, cfg) {
                Ok(r) => {
                    warm_sup = Some(r.x.clone());
                    sup = Some(r);
                }
                Err(e) if !lenient => return Err(e),
                Err(_) => warm_sup = None,
            }
        }
        let mut inf = None;
        if cfg.extrema.inf() {
            let seed = derive_seed(cfg.seed, 2 * k as u64 + 1);
            match node_sup(&neg, proj, route, bounds, eta, warm_inf.as_deref(), seed, cfg) {
                Ok(mut r) => {
                    r.f = -r.f;
                    warm_inf = Some(r.x.clone());
                    inf = Some(r);
                }
                Err(e) if !lenient => return Err(e),
                Err(_) => warm_inf = None,
            }
        }
        out.push(NodeOut { sup, inf });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_chains<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    route: Route,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    chains: Vec<Vec<usize>>,
    cfg: &ProfileConfig,
    lenient: bool,
) -> Result<Vec<NodeOut>> {
    let results: Vec<Result<Vec<NodeOut>>> = if cfg.parallel {
        chains.par_iter().map(|c| run_chain(obj, proj, route, bounds, grid, c, cfg, lenient)).collect()
    } else {
        chains.iter().map(|c| run_chain(obj, proj, route, bounds, grid, c, cfg, lenient)).collect()
    };
    let mut all = Vec::with_capacity(grid.len());
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}

type Unpacked = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn unpack(nodes: Vec<NodeOut>, d: usize) -> Unpacked {
    let nan = vec![f64::NAN; d];
    let mut sup = Vec::with_capacity(nodes.len());
    let mut inf = Vec::with_capacity(nodes.len());
    let mut argmax = Vec::with_capacity(nodes.len());
    let mut argmin = Vec::with_capacity(nodes.len());
    for n in nodes {
        match n.sup {
            Some(r) => {
                sup.push(r.f);
                argmax.push(r.x);
            }
            None => {
                sup.push(f64::NAN);
                argmax.push(nan.clone());
            }
        }
        match n.inf {
            Some(r) => {
                inf.push(r.f);
                argmin.push(r.x);
            }
            None => {
                inf.push(f64::NAN);
                argmin.push(nan.clone());
            }
        }
    }
    (sup, inf, argmax, argmin)
}

fn sweep_1d<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    route: Route,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<ProfileCurve> {
    check_dims(proj, bounds)?;
    if proj.p() != 1 || grid.p() != 1 {
        return Err(Error::invalid("profile curves need a rank-1 projection and a 1-d grid"));
    }
    let block = cfg.chain_block.max(1);
    let idx: Vec<usize> = (0..grid.len()).collect();
    let chains: Vec<Vec<usize>> = idx.chunks(block).map(|c| c.to_vec()).collect();
    let nodes = run_chains(obj, proj, route, bounds, grid, chains, cfg, false)?;
    let (sup, inf, argmax, argmin) = unpack(nodes, proj.d());
    Ok(ProfileCurve {
        projection: proj.clone(),
        eta: grid.scalars(),
        sup,
        inf,
        argmax,
        argmin,
        provenance: Provenance::Exact,
    })
}

/// Profile sup and inf along a rank-1 projection, choosing the coordinate
/// route for coordinate projections.
pub fn profile_curve<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<ProfileCurve> {
    sweep_1d(obj, proj, route_for(proj), bounds, grid, cfg)
}

/// Coordinate profiles `sup/inf {obj(x) : x_i = eta}`.
pub fn coordinate_profiles<O: Objective + ?Sized>(
    obj: &O,
    i: usize,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<ProfileCurve> {
    let proj = Projection::coordinate(bounds.dim(), i)?;
    sweep_1d(obj, &proj, Route::Coordinate(i), bounds, grid, cfg)
}

/// Profiles along a rank-1 projection, always through the fiber solver.
pub fn oblique_profiles<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<ProfileCurve> {
    sweep_1d(obj, proj, Route::Fiber, bounds, grid, cfg)
}

/// Profiles along a rank-2 projection over a masked lattice. Warm starts
/// run along lattice rows. Coordinate pairs use the fixed-coordinate route.
pub fn bivariate_profiles<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<ProfileMap> {
    check_dims(proj, bounds)?;
    if proj.p() != 2 || grid.p() != 2 {
        return Err(Error::invalid("profile maps need a rank-2 projection and a lattice"));
    }
    let (n1, n2) = (grid.resolution[0], grid.resolution[1]);
    let chains: Vec<Vec<usize>> = (0..n1).map(|r| (r * n2..(r + 1) * n2).collect()).collect();
    let nodes = run_chains(obj, proj, route_for(proj), bounds, grid, chains, cfg, false)?;
    let (sup, inf, argmax, argmin) = unpack(nodes, proj.d());
    Ok(ProfileMap {
        projection: proj.clone(),
        grid: grid.clone(),
        sup,
        inf,
        argmax,
        argmin,
        provenance: Provenance::Exact,
    })
}

/// Sup and inf values over a 1-d grid or a lattice. Nodes whose
/// optimization fails hold NaN instead of aborting the sweep.
pub(crate) fn lenient_values<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(proj, bounds)?;
    if proj.p() != grid.p() {
        return Err(Error::invalid("grid and projection ranks differ"));
    }
    let (route, chains): (Route, Vec<Vec<usize>>) = if grid.p() == 1 {
        let idx: Vec<usize> = (0..grid.len()).collect();
        (route_for(proj), idx.chunks(cfg.chain_block.max(1)).map(|c| c.to_vec()).collect())
    } else {
        let (n1, n2) = (grid.resolution[0], grid.resolution[1]);
        (route_for(proj), (0..n1).map(|r| (r * n2..(r + 1) * n2).collect()).collect())
    };
    let nodes = run_chains(obj, proj, route, bounds, grid, chains, cfg, true)?;
    let (sup, inf, _, _) = unpack(nodes, proj.d());
    Ok((sup, inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::FnObjective;

    fn serial() -> ProfileConfig {
        ProfileConfig { parallel: false, ..ProfileConfig::default() }
    }

    #[test]
    fn fiber_constant_objective_gives_identity() {
        let f = FnObjective(|x: &[f64]| x[0]);
        let b = BoxDomain::unit(2);
        let g = ProfileGrid::line(0.0, 1.0, 11).unwrap();
        let c = coordinate_profiles(&f, 0, &b, &g, &serial()).unwrap();
        for j in 0..11 {
            assert_eq!(c.sup[j], c.eta[j]);
            assert_eq!(c.inf[j], c.eta[j]);
        }
    }

    #[test]
    fn coordinate_and_fiber_routes_agree() {
        let f = FnObjective(|x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1] + 0.3).cos() + x[2] * x[2]);
        let b = BoxDomain::unit(3);
        let g = ProfileGrid::line(0.0, 1.0, 9).unwrap();
        let a = coordinate_profiles(&f, 1, &b, &g, &serial()).unwrap();
        let p = Projection::coordinate(3, 1).unwrap();
        let o = oblique_profiles(&f, &p, &b, &g, &serial()).unwrap();
        for j in 0..9 {
            assert!((a.sup[j] - o.sup[j]).abs() < 1e-6, "{j}: {} {}", a.sup[j], o.sup[j]);
            assert!((a.inf[j] - o.inf[j]).abs() < 1e-6, "{j}: {} {}", a.inf[j], o.inf[j]);
        }
    }

    #[test]
    fn parallel_and_serial_sweeps_match() {
        let f = FnObjective(|x: &[f64]| (5.0 * x[0] + x[1]).sin() + x[1] * x[0]);
        let b = BoxDomain::unit(2);
        let p = Projection::oblique(&[1.0, 2.0]).unwrap();
        let g = ProfileGrid::for_projection(&p, &b, 40).unwrap();
        let cfg = ProfileConfig { chain_block: 7, ..ProfileConfig::default() };
        let a = profile_curve(&f, &p, &b, &g, &cfg).unwrap();
        let s = profile_curve(&f, &p, &b, &g, &ProfileConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(a.sup, s.sup);
        assert_eq!(a.inf, s.inf);
        assert_eq!(a.argmax, s.argmax);
    }

    #[test]
    fn separable_map_matches_closed_form() {
        let g3 = |t: f64| (4.0 * t).sin();
        let f = FnObjective(move |x: &[f64]| x[0] * x[0] - x[1] + g3(x[2]));
        let b = BoxDomain::unit(3);
        let p = Projection::coordinate_pair(3, 0, 1).unwrap();
        let grid = ProfileGrid::lattice(&p, &b, 6, 5).unwrap();
        let m = bivariate_profiles(&f, &p, &b, &grid, &serial()).unwrap();
        let min3 = g3(1.0);
        for (k, eta) in grid.etas.iter().enumerate() {
            let base = eta[0] * eta[0] - eta[1];
            assert!((m.sup[k] - (base + 1.0)).abs() < 1e-6);
            assert!((m.inf[k] - (base + min3)).abs() < 1e-6);
        }
    }

    #[test]
    fn pair_route_agrees_with_fiber_route() {
        let f = FnObjective(|x: &[f64]| (3.0 * x[0] - x[3]).sin() + x[1] * x[2] - (x[2] - 0.3).powi(2));
        let b = BoxDomain::unit(4);
        let p = Projection::coordinate_pair(4, 2, 0).unwrap();
        assert!(route_for(&p) == Route::CoordinatePair(2, 0));
        let grid = ProfileGrid::lattice(&p, &b, 4, 4).unwrap();
        let m = bivariate_profiles(&f, &p, &b, &grid, &serial()).unwrap();
        for (k, eta) in grid.etas.iter().enumerate() {
            assert_eq!(m.argmax[k][2], eta[0]);
            assert_eq!(m.argmax[k][0], eta[1]);
            let r = fiber_sup(&f, &p, &b, eta, None, 3, 8, &serial()).unwrap();
            assert!((m.sup[k] - r.f).abs() < 1e-6, "{eta:?}: {} vs {}", m.sup[k], r.f);
        }
    }

    #[test]
    fn errors_carry_the_node() {
        let f = FnObjective(|x: &[f64]| x[0]);
        let b = BoxDomain::unit(2);
        let g = ProfileGrid::from_values(&[0.5, 1.5]).unwrap();
        match coordinate_profiles(&f, 0, &b, &g, &serial()) {
            Err(Error::AtNode { eta, .. }) => assert_eq!(eta, vec![1.5]),
            other => panic!("{other:?}"),
        }
    }
}
