//! Threshold crossings of profile curves.

use serde::Serialize;

use super::ProfileCurve;
use crate::design::Sobol;
use crate::error::{Error, Result};
use crate::optimize::{BoxDomain, Projection, ProjectionKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Shorter than one grid cell.
    pub low_resolution: bool,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Partition of the grid span at a threshold: `non_excursion` where the
/// sup profile is below `tau`, `excursion` where the inf profile is at or
/// above it, and the rest `undetermined`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcursionIntervals {
    pub tau: f64,
    pub non_excursion: Vec<Interval>,
    pub excursion: Vec<Interval>,
    pub undetermined: Vec<Interval>,
}

pub fn total_length(iv: &[Interval]) -> f64 {
    iv.iter().map(Interval::length).fold(0.0, |a, b| a + b)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    /// Region `v < tau`.
    Below,
    /// Region `v >= tau`.
    AtOrAbove,
}

fn inside(side: Side, v: f64, tau: f64) -> bool {
    match side {
        Side::Below => v < tau,
        Side::AtOrAbove => v >= tau,
    }
}

/// Linear crossing of `tau` between two nodes.
fn linear_crossing(a: f64, b: f64, va: f64, vb: f64, tau: f64) -> f64 {
    let t = ((tau - va) / (vb - va)).clamp(0.0, 1.0);
    if t.is_finite() { a + t * (b - a) } else { 0.5 * (a + b) }
}

/// Region of the span where `values` lies on `side` of `tau`; `cross`
/// locates the crossing inside a cell.
fn region(
    eta: &[f64],
    values: &[f64],
    tau: f64,
    side: Side,
    cross: &mut dyn FnMut(usize) -> f64,
) -> Vec<(f64, f64)> {
    let n = eta.len();
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let push = |lo: f64, hi: f64, pieces: &mut Vec<(f64, f64)>| {
        if let Some(last) = pieces.last_mut() {
            if last.1 == lo {
                last.1 = hi;
                return;
            }
        }
        pieces.push((lo, hi));
    };
    if n == 1 {
        if inside(side, values[0], tau) {
            pieces.push((eta[0], eta[0]));
        }
        return pieces;
    }
    for j in 0..n - 1 {
        let (a, b) = (eta[j], eta[j + 1]);
        let (ia, ib) = (inside(side, values[j], tau), inside(side, values[j + 1], tau));
        if values[j].is_nan() || values[j + 1].is_nan() {
            continue;
        }
        match (ia, ib) {
            (true, true) => push(a, b, &mut pieces),
            (true, false) => push(a, cross(j), &mut pieces),
            (false, true) => push(cross(j), b, &mut pieces),
            (false, false) => {}
        }
    }
    pieces
}

fn complement(lo: f64, hi: f64, taken: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = taken.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cur = lo;
    for (a, b) in sorted {
        if a > cur {
            out.push((cur, a));
        }
        cur = cur.max(b);
    }
    if cur < hi {
        out.push((cur, hi));
    }
    out
}

fn finish(pieces: Vec<(f64, f64)>, cell: f64) -> Vec<Interval> {
    pieces.into_iter().map(|(lo, hi)| Interval { lo, hi, low_resolution: hi - lo < cell * (1.0 - 1e-9) }).collect()
}

fn check_curve(eta: &[f64], sup: &[f64], inf: &[f64]) -> Result<()> {
    if eta.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: eta.len() });
    }
    if sup.len() != eta.len() || inf.len() != eta.len() {
        return Err(Error::invalid("profile values do not match the grid"));
    }
    if eta.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

fn build(
    eta: &[f64],
    sup: &[f64],
    inf: &[f64],
    tau: f64,
    cross_sup: &mut dyn FnMut(usize) -> f64,
    cross_inf: &mut dyn FnMut(usize) -> f64,
) -> ExcursionIntervals {
    let n = eta.len();
    let cell = (eta[n - 1] - eta[0]) / (n - 1) as f64;
    let non = region(eta, sup, tau, Side::Below, cross_sup);
    let exc = region(eta, inf, tau, Side::AtOrAbove, cross_inf);
    let mut taken = non.clone();
    taken.extend(exc.iter().copied());
    let und = complement(eta[0], eta[n - 1], &taken);
    ExcursionIntervals {
        tau,
        non_excursion: finish(non, cell),
        excursion: finish(exc, cell),
        undetermined: finish(und, cell),
    }
}

/// Intervals from arbitrary upper and lower curves, with crossings placed
/// by linear interpolation between nodes. NaN values never qualify.
pub fn excursion_intervals_from(eta: &[f64], upper: &[f64], lower: &[f64], tau: f64) -> Result<ExcursionIntervals> {
    check_curve(eta, upper, lower)?;
    let mut cs = |j: usize| linear_crossing(eta[j], eta[j + 1], upper[j], upper[j + 1], tau);
    let mut ci = |j: usize| linear_crossing(eta[j], eta[j + 1], lower[j], lower[j + 1], tau);
    Ok(build(eta, upper, lower, tau, &mut cs, &mut ci))
}

pub fn excursion_intervals(curve: &ProfileCurve, tau: f64) -> Result<ExcursionIntervals> {
    excursion_intervals_from(&curve.eta, &curve.sup, &curve.inf, tau)
}

fn bisect(eta: &[f64], vals: &[f64], j: usize, tau: f64, f: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let (mut a, mut b) = (eta[j], eta[j + 1]);
    let below_a = vals[j] < tau;
    for _ in 0..20 {
        let m = 0.5 * (a + b);
        if (f(m)? < tau) == below_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Like [`excursion_intervals`], but each crossing is refined by bisection
/// (20 halvings) on the exact profiles supplied as closures.
pub fn refine_intervals(
    curve: &ProfileCurve,
    tau: f64,
    sup_at: &dyn Fn(f64) -> Result<f64>,
    inf_at: &dyn Fn(f64) -> Result<f64>,
) -> Result<ExcursionIntervals> {
    let eta = &curve.eta;
    check_curve(eta, &curve.sup, &curve.inf)?;
    let mut failure: Option<Error> = None;
    let mut fails = None;
    let mut cs = |j: usize| {
        bisect(eta, &curve.sup, j, tau, sup_at).unwrap_or_else(|e| {
            fails.get_or_insert(e);
            f64::NAN
        })
    };
    let mut ci = |j: usize| {
        bisect(eta, &curve.inf, j, tau, inf_at).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    };
    let out = build(eta, &curve.sup, &curve.inf, tau, &mut cs, &mut ci);
    match fails.or(failure) {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Volume of `{x in bounds : Psi' x in union of intervals}`. Exact for
/// coordinate projections, quasi Monte Carlo (2^16 Sobol points) otherwise.
pub fn excluded_measure(proj: &Projection, bounds: &BoxDomain, intervals: &[Interval]) -> Result<f64> {
    if proj.p() != 1 || proj.d() != bounds.dim() {
        return Err(Error::invalid("excluded measure needs a rank-1 projection matching the box"));
    }
    let d = bounds.dim();
    if let ProjectionKind::Coordinate(i) = proj.kind() {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        let len = intervals.iter().map(|iv| (iv.hi.min(u) - iv.lo.max(l)).max(0.0)).fold(0.0, |a, b| a + b);
        let rest: f64 = (0..d).filter(|j| *j != i).map(|j| bounds.width(j)).product();
        return Ok(len * rest);
    }
    let vol: f64 = (0..d).map(|j| bounds.width(j)).product();
    let mut sob = Sobol::scrambled(d, 0x766f6c)?;
    let n = 1usize << 16;
    let mut hit = 0usize;
    for _ in 0..n {
        let x = bounds.from_unit(&sob.next_point());
        let e = proj.project(&x)[0];
        if intervals.iter().any(|iv| e >= iv.lo && e <= iv.hi) {
            hit += 1;
        }
    }
    Ok(vol * hit as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_curve_below_threshold() {
        let eta = [0.0, 0.5, 1.0];
        let s = [-1.0; 3];
        let r = excursion_intervals_from(&eta, &s, &[-2.0; 3], 0.0).unwrap();
        assert_eq!(r.non_excursion, vec![Interval { lo: 0.0, hi: 1.0, low_resolution: false }]);
        assert!(r.excursion.is_empty() && r.undetermined.is_empty());
    }

    #[test]
    fn linear_crossing_is_exact() {
        let eta: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let r = excursion_intervals_from(&eta, &eta, &eta, 0.13).unwrap();
        assert_eq!(r.non_excursion.len(), 1);
        assert_eq!(r.non_excursion[0].lo, 0.0);
        assert!((r.non_excursion[0].hi - 0.13).abs() < 1e-14);
        assert!((r.excursion[0].lo - 0.13).abs() < 1e-14);
        assert!(r.undetermined.is_empty());
    }

    #[test]
    fn partition_covers_span() {
        let eta: Vec<f64> = (0..50).map(|j| j as f64 / 49.0).collect();
        let sup: Vec<f64> = eta.iter().map(|e| (9.0 * e).sin() + 0.3).collect();
        let inf: Vec<f64> = sup.iter().map(|s| s - 0.6).collect();
        let r = excursion_intervals_from(&eta, &sup, &inf, 0.0).unwrap();
        let total = total_length(&r.non_excursion) + total_length(&r.excursion) + total_length(&r.undetermined);
        assert!((total - 1.0).abs() < 1e-12);
        for list in [&r.non_excursion, &r.excursion, &r.undetermined] {
            for w in list.windows(2) {
                assert!(w[0].hi < w[1].lo);
            }
        }
    }

    #[test]
    fn narrow_dip_is_flagged() {
        let eta = [0.0, 1.0, 2.0, 3.0];
        let sup = [1.0, -0.1, 1.0, 1.0];
        let r = excursion_intervals_from(&eta, &sup, &[-5.0; 4], 0.0).unwrap();
        assert_eq!(r.non_excursion.len(), 1);
        let iv = &r.non_excursion[0];
        assert!(iv.low_resolution && iv.lo < 1.0 && iv.hi > 1.0);
    }

    #[test]
    fn coordinate_measure() {
        let b = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let p = Projection::coordinate(2, 0).unwrap();
        let iv = [Interval { lo: 0.1, hi: 0.3, low_resolution: false }];
        assert!((excluded_measure(&p, &b, &iv).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn oblique_measure_by_quadrature() {
        // Strip x + y <= 1 in the unit square has area 1/2.
        let b = BoxDomain::unit(2);
        let p = Projection::oblique(&[1.0, 1.0]).unwrap();
        let iv = [Interval { lo: 0.0, hi: 1.0 / 2f64.sqrt(), low_resolution: false }];
        assert!((excluded_measure(&p, &b, &iv).unwrap() - 0.5).abs() < 1e-3);
    }
}
