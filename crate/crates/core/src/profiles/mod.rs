//! Profile sup/inf functions along linear projections, their cheap
//! approximations, and the excursion regions they delimit.

mod approx;
mod export;
mod intervals;
mod spline;
mod sweep;

pub use approx::{
    approximate_curve, approximate_map, approximate_profile_1d, approximate_profile_2d, default_knot_count,
    ApproxCurve,
};
pub use export::{curve_csv, curve_json, map_csv, map_json, write_real};
pub use intervals::{
    excluded_measure, excursion_intervals, excursion_intervals_from, refine_intervals, total_length,
    ExcursionIntervals, Interval,
};
pub use spline::{CubicSpline, HermiteSpline};
pub(crate) use sweep::lenient_values;
pub use sweep::{
    bivariate_profiles, coordinate_profiles, oblique_profiles, profile_curve, sup_at, NodeOptimum,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::{BoxDomain, EqualityFiber, FiberConfig, LbfgsbConfig, Projection};

/// How the values of a curve or map were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    SplineApprox { k: usize },
    HermiteApprox { k: usize },
    KrigingApprox { k: usize },
}

/// Which extrema a sweep computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extrema {
    Both,
    Sup,
    Inf,
}

impl Extrema {
    fn sup(self) -> bool {
        matches!(self, Extrema::Both | Extrema::Sup)
    }
    fn inf(self) -> bool {
        matches!(self, Extrema::Both | Extrema::Inf)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileConfig {
    /// Starts per node; `None` means 8 for `p = 1` and 10 for `p = 2`.
    pub n_starts: Option<usize>,
    /// Random points scored per node to pick the random starts.
    pub scan: usize,
    pub seed: u64,
    /// Length of the warm-start chains. Nodes are split into consecutive
    /// blocks of this size; chains never cross blocks, so results do not
    /// depend on how blocks are scheduled.
    pub chain_block: usize,
    pub parallel: bool,
    pub extrema: Extrema,
    pub lbfgsb: LbfgsbConfig,
    pub fiber: FiberConfig,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            n_starts: None,
            scan: 64,
            seed: 0,
            chain_block: 16,
            parallel: true,
            extrema: Extrema::Both,
            lbfgsb: LbfgsbConfig::default(),
            fiber: FiberConfig::default(),
        }
    }
}

impl ProfileConfig {
    pub fn starts_for(&self, p: usize) -> usize {
        self.n_starts.unwrap_or(if p == 1 { 8 } else { 10 })
    }
}

/// Evaluation points in the image `E_Psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileGrid {
    /// One `p`-vector per node; 2-d lattices are row-major.
    pub etas: Vec<Vec<f64>>,
    pub resolution: Vec<usize>,
    /// False for lattice nodes outside `E_Psi`.
    pub feasible: Vec<bool>,
}

impl ProfileGrid {
    /// `n >= 2` equispaced points on `[lo, hi]`.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad 1-d grid [{lo}, {hi}] with {n} points")));
        }
        let etas = (0..n)
            .map(|j| if j == n - 1 { vec![hi] } else { vec![lo + (hi - lo) * j as f64 / (n - 1) as f64] })
            .collect();
        Ok(ProfileGrid { etas, resolution: vec![n], feasible: vec![true; n] })
    }

    /// 1-d grid from strictly increasing values.
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("1-d grid values must be finite and strictly increasing"));
        }
        Ok(ProfileGrid {
            etas: v.iter().map(|x| vec![*x]).collect(),
            resolution: vec![v.len()],
            feasible: vec![true; v.len()],
        })
    }

    /// `n` equispaced points spanning `E_Psi` of a 1-d projection.
    pub fn for_projection(proj: &Projection, bounds: &BoxDomain, n: usize) -> Result<Self> {
        if proj.p() != 1 {
            return Err(Error::invalid("1-d grid needs a rank-1 projection"));
        }
        let (lo, hi) = proj.image_bounds(bounds)[0];
        Self::line(lo, hi, n)
    }

    /// `n1 x n2` lattice over the bounding box of `E_Psi`, with nodes
    /// outside `E_Psi` masked.
    pub fn lattice(proj: &Projection, bounds: &BoxDomain, n1: usize, n2: usize) -> Result<Self> {
        if proj.p() != 2 {
            return Err(Error::invalid("lattice needs a rank-2 projection"));
        }
        if n1 < 2 || n2 < 2 {
            return Err(Error::invalid("lattice needs at least 2 points per axis"));
        }
        let ib = proj.image_bounds(bounds);
        let a = Self::line(ib[0].0, ib[0].1, n1)?;
        let b = Self::line(ib[1].0, ib[1].1, n2)?;
        let mut etas = Vec::with_capacity(n1 * n2);
        let mut feasible = Vec::with_capacity(n1 * n2);
        for ea in &a.etas {
            for eb in &b.etas {
                let eta = vec![ea[0], eb[0]];
                let ok = match EqualityFiber::new(proj, &eta, bounds) {
                    Ok(_) => true,
                    Err(Error::Infeasible(_)) => false,
                    Err(e) => return Err(e),
                };
                etas.push(eta);
                feasible.push(ok);
            }
        }
        Ok(ProfileGrid { etas, resolution: vec![n1, n2], feasible })
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    pub fn p(&self) -> usize {
        self.resolution.len()
    }

    /// Scalar node values of a 1-d grid.
    pub fn scalars(&self) -> Vec<f64> {
        self.etas.iter().map(|e| e[0]).collect()
    }

    /// Axis values of a lattice.
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let n2 = self.resolution[1];
        let a = (0..self.resolution[0]).map(|i| self.etas[i * n2][0]).collect();
        let b = (0..n2).map(|j| self.etas[j][1]).collect();
        (a, b)
    }
}

/// Profile extrema over a 1-d grid.
#[derive(Clone, Debug)]
pub struct ProfileCurve {
    pub projection: Projection,
    pub eta: Vec<f64>,
    pub sup: Vec<f64>,
    pub inf: Vec<f64>,
    pub argmax: Vec<Vec<f64>>,
    pub argmin: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

/// Profile extrema over a 2-d lattice; masked nodes hold NaN.
#[derive(Clone, Debug)]
pub struct ProfileMap {
    pub projection: Projection,
    pub grid: ProfileGrid,
    pub sup: Vec<f64>,
    pub inf: Vec<f64>,
    pub argmax: Vec<Vec<f64>>,
    pub argmin: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ProfileMap {
    /// Values of one lattice row (first axis index `i`).
    pub fn row(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let n2 = self.grid.resolution[1];
        (self.sup[i * n2..(i + 1) * n2].to_vec(), self.inf[i * n2..(i + 1) * n2].to_vec())
    }
}
