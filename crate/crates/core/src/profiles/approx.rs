//! Cheap profile curves and maps interpolated from a few exact nodes.

use nalgebra::{DMatrix, DVector};

use super::sweep::{profile_curve, sup_at};
use super::{CubicSpline, HermiteSpline, ProfileConfig, ProfileCurve, ProfileGrid, ProfileMap, Provenance};
use crate::design::{latin_hypercube, Sobol};
use crate::error::{Error, Result};
use crate::gp::{FitConfig, GpModel, KernelFamily, TrendBasis};
use crate::optimize::{eval_with_gradient, BoxDomain, EqualityFiber, Negated, Objective, Projection, ProjectionKind};
use crate::rng::derive_seed;

/// `ceil(10 sqrt(d))` knots.
pub fn default_knot_count(d: usize) -> usize {
    (10.0 * (d as f64).sqrt()).ceil() as usize
}

/// Interpolates `k >= 4` exact profile values at `query`: a cubic spline,
/// or piecewise cubic Hermite when slopes are given.
pub fn approximate_profile_1d(knots: &[f64], values: &[f64], slopes: Option<&[f64]>, query: &[f64]) -> Result<Vec<f64>> {
    if knots.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: knots.len() });
    }
    Ok(match slopes {
        Some(s) => {
            let h = HermiteSpline::new(knots, values, s)?;
            query.iter().map(|t| h.eval(*t)).collect()
        }
        None => {
            let c = CubicSpline::new(knots, values)?;
            query.iter().map(|t| c.eval(*t)).collect()
        }
    })
}

/// Kriging interpolation (Matern 5/2, constant trend, maximum likelihood)
/// of `k >= 10` exact values at 2-d nodes. Coordinates are rescaled to
/// the unit square spanned by nodes and queries.
pub fn approximate_profile_2d(nodes: &[Vec<f64>], values: &[f64], query: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    if nodes.len() < 10 {
        return Err(Error::InsufficientData { needed: 10, got: nodes.len() });
    }
    if values.len() != nodes.len() {
        return Err(Error::invalid("one value per node is required"));
    }
    if nodes.iter().chain(query).any(|p| p.len() != 2 || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("2-d nodes must be finite pairs"));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in nodes.iter().chain(query) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let norm = |p: &Vec<f64>| -> Vec<f64> {
        (0..2).map(|a| if hi[a] > lo[a] { ((p[a] - lo[a]) / (hi[a] - lo[a])).clamp(0.0, 1.0) } else { 0.5 }).collect()
    };
    let design: Vec<Vec<f64>> = nodes.iter().map(norm).collect();
    for i in 0..design.len() {
        for j in 0..i {
            if design[i] == design[j] {
                return Err(Error::invalid(format!("duplicate nodes {j} and {i}")));
            }
        }
    }
    let cfg = FitConfig { seed, ..FitConfig::default() };
    let m = GpModel::fit(design, values.to_vec(), KernelFamily::Matern52, TrendBasis::constant(), &cfg)?;
    Ok(query.iter().map(|q| m.posterior_mean(&norm(q))).collect())
}

/// Approximate curve with the exact knot curve it was built from.
#[derive(Clone, Debug)]
pub struct ApproxCurve {
    pub curve: ProfileCurve,
    pub knots: ProfileCurve,
}

/// `d P / d eta` at an optimizer `x` of a fiber problem, from the
/// multiplier of the projection constraint. Faces active at `x` take
/// part in the least-squares fit of the gradient.
fn profile_slope<O: Objective + ?Sized>(obj: &O, proj: &Projection, bounds: &BoxDomain, x: &[f64]) -> f64 {
    let d = x.len();
    let mut g = vec![0.0; d];
    eval_with_gradient(obj, x, Some(bounds), &mut g);
    if let ProjectionKind::Coordinate(i) = proj.kind() {
        return g[i];
    }
    let psi = proj.column(0);
    let active: Vec<usize> = (0..d)
        .filter(|&j| {
            let w = bounds.width(j);
            x[j] - bounds.lower()[j] <= 1e-9 * w || bounds.upper()[j] - x[j] <= 1e-9 * w
        })
        .collect();
    let a = DMatrix::from_fn(d, 1 + active.len(), |r, c| if c == 0 { psi[r] } else if r == active[c - 1] { 1.0 } else { 0.0 });
    match a.svd(true, true).solve(&DVector::from_vec(g), 1e-12) {
        Ok(l) => l[0],
        Err(_) => f64::NAN,
    }
}

/// Exact profiles at `k` Latin-hypercube knots in `E_Psi`, interpolated at
/// the nodes of `query`. With `use_slopes`, the knot slopes come from the
/// objective gradient at the optimizers and Hermite segments are used.
pub fn approximate_curve<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    query: &ProfileGrid,
    k: usize,
    use_slopes: bool,
    cfg: &ProfileConfig,
) -> Result<ApproxCurve> {
    if k < 4 {
        return Err(Error::InsufficientData { needed: 4, got: k });
    }
    if proj.p() != 1 {
        return Err(Error::invalid("curve approximation needs a rank-1 projection"));
    }
    let (lo, hi) = proj.image_bounds(bounds)[0];
    let mut t: Vec<f64> =
        latin_hypercube(k, 1, derive_seed(cfg.seed, 0x6b6e6f74)).into_iter().map(|u| lo + (hi - lo) * u[0]).collect();
    t.sort_by(f64::total_cmp);
    let knot_grid = ProfileGrid::from_values(&t)?;
    let knots = profile_curve(obj, proj, bounds, &knot_grid, cfg)?;
    let q = query.scalars();

    let (sup, inf, provenance) = if use_slopes {
        let neg = Negated(obj);
        let ss: Vec<f64> = knots.argmax.iter().map(|x| profile_slope(obj, proj, bounds, x)).collect();
        let si: Vec<f64> = knots.argmin.iter().map(|x| -profile_slope(&neg, proj, bounds, x)).collect();
        (
            approximate_profile_1d(&t, &knots.sup, Some(&ss), &q)?,
            approximate_profile_1d(&t, &knots.inf, Some(&si), &q)?,
            Provenance::HermiteApprox { k },
        )
    } else {
        (
            approximate_profile_1d(&t, &knots.sup, None, &q)?,
            approximate_profile_1d(&t, &knots.inf, None, &q)?,
            Provenance::SplineApprox { k },
        )
    };
    let nan = vec![f64::NAN; proj.d()];
    let curve = ProfileCurve {
        projection: proj.clone(),
        eta: q.clone(),
        sup,
        inf,
        argmax: vec![nan.clone(); q.len()],
        argmin: vec![nan; q.len()],
        provenance,
    };
    Ok(ApproxCurve { curve, knots })
}

/// Exact profiles at `k` feasible Sobol nodes of the lattice bounding box,
/// kriged onto the unmasked lattice nodes.
pub fn approximate_map<O: Objective + ?Sized>(
    obj: &O,
    proj: &Projection,
    bounds: &BoxDomain,
    lattice: &ProfileGrid,
    k: usize,
    cfg: &ProfileConfig,
) -> Result<ProfileMap> {
    if k < 10 {
        return Err(Error::InsufficientData { needed: 10, got: k });
    }
    if proj.p() != 2 || lattice.p() != 2 {
        return Err(Error::invalid("map approximation needs a rank-2 projection and a lattice"));
    }
    let ib = proj.image_bounds(bounds);
    let mut sob = Sobol::scrambled(2, derive_seed(cfg.seed, 0x6d6170))?;
    let mut nodes = Vec::with_capacity(k);
    for _ in 0..1_000 * k {
        if nodes.len() == k {
            break;
        }
        let u = sob.next_point();
        let eta: Vec<f64> = (0..2).map(|a| ib[a].0 + u[a] * (ib[a].1 - ib[a].0)).collect();
        match EqualityFiber::new(proj, &eta, bounds) {
            Ok(_) => nodes.push(eta),
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if nodes.len() < k {
        return Err(Error::InsufficientData { needed: k, got: nodes.len() });
    }
    let neg = Negated(obj);
    let mut sup = Vec::with_capacity(k);
    let mut inf = Vec::with_capacity(k);
    for (j, eta) in nodes.iter().enumerate() {
        let s = derive_seed(derive_seed(cfg.seed, 0x6d6170), j as u64);
        sup.push(sup_at(obj, proj, bounds, eta, None, derive_seed(s, 0), cfg)?.f);
        inf.push(-sup_at(&neg, proj, bounds, eta, None, derive_seed(s, 1), cfg)?.f);
    }
    let live: Vec<usize> = (0..lattice.len()).filter(|&i| lattice.feasible[i]).collect();
    let q: Vec<Vec<f64>> = live.iter().map(|&i| lattice.etas[i].clone()).collect();
    let ps = approximate_profile_2d(&nodes, &sup, &q, cfg.seed)?;
    let pi = approximate_profile_2d(&nodes, &inf, &q, cfg.seed)?;
    let mut msup = vec![f64::NAN; lattice.len()];
    let mut minf = vec![f64::NAN; lattice.len()];
    for (j, &i) in live.iter().enumerate() {
        msup[i] = ps[j];
        minf[i] = pi[j];
    }
    let nan = vec![f64::NAN; proj.d()];
    Ok(ProfileMap {
        projection: proj.clone(),
        grid: lattice.clone(),
        sup: msup,
        inf: minf,
        argmax: vec![nan.clone(); lattice.len()],
        argmin: vec![nan; lattice.len()],
        provenance: Provenance::KrigingApprox { k },
    })
}
