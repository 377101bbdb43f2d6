//! Linear projections, their null spaces, and feasible points of fibers.

use nalgebra::{DMatrix, DVector};

use super::lp::{LinearProgram, LpSolution};
use super::BoxDomain;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, orthogonal_complement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionKind {
    Coordinate(usize),
    Oblique,
    Planar,
}

/// Full-column-rank `d x p` matrix `Psi` with `p` in {1, 2}.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    psi: DMatrix<f64>,
    kind: ProjectionKind,
}

impl Projection {
    pub fn coordinate(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::invalid(format!("coordinate {i} out of range for dimension {d}")));
        }
        let mut psi = DMatrix::zeros(d, 1);
        psi[(i, 0)] = 1.0;
        Ok(Projection { psi, kind: ProjectionKind::Coordinate(i) })
    }

    /// Single direction, normalized to unit length.
    pub fn oblique(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("projection direction must be finite and nonzero"));
        }
        let psi = DMatrix::from_iterator(v.len(), 1, v.iter().map(|a| a / norm));
        Ok(Projection { psi, kind: ProjectionKind::Oblique })
    }

    /// Two columns, used as given.
    pub fn planar(c1: &[f64], c2: &[f64]) -> Result<Self> {
        if c1.len() != c2.len() {
            return Err(Error::invalid("projection columns differ in length"));
        }
        let psi = DMatrix::from_fn(c1.len(), 2, |i, k| if k == 0 { c1[i] } else { c2[i] });
        Self::from_matrix(psi)
    }

    pub fn coordinate_pair(d: usize, i: usize, j: usize) -> Result<Self> {
        if i >= d || j >= d || i == j {
            return Err(Error::invalid(format!("bad coordinate pair ({i}, {j}) for dimension {d}")));
        }
        let mut psi = DMatrix::zeros(d, 2);
        psi[(i, 0)] = 1.0;
        psi[(j, 1)] = 1.0;
        Ok(Projection { psi, kind: ProjectionKind::Planar })
    }

    pub fn from_matrix(psi: DMatrix<f64>) -> Result<Self> {
        let (d, p) = psi.shape();
        if !(p == 1 || p == 2) || p >= d {
            return Err(Error::invalid(format!("projection must be d x p with p in {{1,2}} and p < d, got {d} x {p}")));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection has non-finite entries"));
        }
        if numerical_rank(&psi, 1e-10) < p {
            return Err(Error::invalid("projection matrix is rank deficient"));
        }
        let kind = if p == 1 {
            let nz: Vec<usize> = (0..d).filter(|&i| psi[(i, 0)] != 0.0).collect();
            if nz.len() == 1 && psi[(nz[0], 0)] == 1.0 {
                ProjectionKind::Coordinate(nz[0])
            } else {
                ProjectionKind::Oblique
            }
        } else {
            ProjectionKind::Planar
        };
        Ok(Projection { psi, kind })
    }

    pub fn d(&self) -> usize {
        self.psi.nrows()
    }

    pub fn p(&self) -> usize {
        self.psi.ncols()
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.psi.column(k).iter().copied().collect()
    }

    /// `Psi' x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.p()).map(|k| (0..self.d()).map(|i| self.psi[(i, k)] * x[i]).sum()).collect()
    }

    /// Per-component range of `Psi' x` over the box (exact for a box).
    pub fn image_bounds(&self, b: &BoxDomain) -> Vec<(f64, f64)> {
        (0..self.p())
            .map(|k| {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for i in 0..self.d() {
                    let a = self.psi[(i, k)] * b.lower()[i];
                    let c = self.psi[(i, k)] * b.upper()[i];
                    lo += a.min(c);
                    hi += a.max(c);
                }
                (lo, hi)
            })
            .collect()
    }
}

/// Orthonormal basis of `Null(Psi')` with the first nonzero entry of each
/// column positive.
pub fn null_space(proj: &Projection) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..proj.p()).map(|k| proj.psi.column(k).into_owned()).collect();
    orthogonal_complement(&cols, proj.d())
}

/// A point `xi` of the fiber `{x in box : Psi' x = eta}`.
///
/// Maximizes the smallest distance to the box faces, so the point is
/// interior whenever the fiber has nonempty relative interior. Returns an
/// infeasibility error when `eta` lies outside the image of the box.
pub fn lp_feasible_point(proj: &Projection, eta: &[f64], b: &BoxDomain) -> Result<Vec<f64>> {
    Ok(EqualityFiber::new(proj, eta, b)?.xi)
}

/// Fiber `{x in box : Psi' x = eta}` written as `xi + N z`.
///
/// Coordinates that are forced onto a face of the box (implicit
/// equalities) are folded into the basis, so `N` spans the affine hull of
/// the fiber and `xi` lies in its relative interior.
#[derive(Clone, Debug)]
pub struct EqualityFiber {
    pub projection: Projection,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub basis: DMatrix<f64>,
    /// Smallest distance from `xi` to the faces of non-pinned coordinates.
    pub margin: f64,
    /// Coordinates fixed to a box face on this fiber.
    pub pinned: Vec<usize>,
}

impl EqualityFiber {
    pub fn new(proj: &Projection, eta: &[f64], b: &BoxDomain) -> Result<Self> {
        let d = proj.d();
        if b.dim() != d || eta.len() != proj.p() {
            return Err(Error::invalid("fiber dimensions do not match projection"));
        }
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite eta"));
        }
        let scale = b.lower().iter().zip(b.upper()).map(|(l, u)| u - l).fold(0.0, f64::max);
        let mut pinned: Vec<(usize, f64)> = Vec::new();
        let (mut y, mut t) = max_slack(proj, eta, b, &pinned)?;
        if t <= 1e-10 * scale {
            // Find coordinates whose range on the fiber is degenerate.
            for i in 0..d {
                let hi = coord_extreme(proj, eta, b, i, 1.0)?;
                let lo = -coord_extreme(proj, eta, b, i, -1.0)?;
                if hi - lo <= 1e-10 * b.width(i) {
                    let w = b.width(i);
                    let mut v = 0.5 * (hi + lo);
                    if v.abs() <= 1e-9 * w {
                        v = 0.0;
                    } else if (v - w).abs() <= 1e-9 * w {
                        v = w;
                    }
                    pinned.push((i, v));
                }
            }
            let r = max_slack(proj, eta, b, &pinned)?;
            y = r.0;
            t = r.1;
        }
        let mut xi: Vec<f64> = (0..d).map(|i| b.lower()[i] + y[i]).collect();
        for &(i, v) in &pinned {
            xi[i] = b.lower()[i] + v;
        }

        let mut span: Vec<DVector<f64>> =
            (0..proj.p()).map(|k| proj.psi.column(k).into_owned()).collect();
        for &(i, _) in &pinned {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            span.push(e);
        }
        let basis = orthogonal_complement(&span, d);

        // Remove rounding residue from the equality constraints.
        let resid: Vec<f64> = proj.project(&xi).iter().zip(eta).map(|(a, e)| e - a).collect();
        if resid.iter().any(|r| *r != 0.0) && pinned.is_empty() {
            let gram = proj.psi.transpose() * &proj.psi;
            if let Some(ch) = gram.cholesky() {
                let c = ch.solve(&DVector::from_vec(resid));
                let dx = &proj.psi * c;
                for i in 0..d {
                    xi[i] += dx[i];
                }
                b.clamp(&mut xi);
            }
        }

        Ok(EqualityFiber {
            projection: proj.clone(),
            eta: eta.to_vec(),
            xi,
            basis,
            margin: t.max(0.0),
            pinned: pinned.into_iter().map(|(i, _)| i).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_single_point(&self) -> bool {
        self.basis.ncols() == 0
    }

    pub fn point(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.xi.clone();
        for (k, zk) in z.iter().enumerate() {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += self.basis[(i, k)] * zk;
            }
        }
        x
    }

    /// Coordinates `z` of the orthogonal projection of `x` onto the fiber's
    /// affine hull.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (0..x.len()).map(|i| self.basis[(i, k)] * (x[i] - self.xi[i])).sum())
            .collect()
    }
}

/// Max-min-slack LP in `y = x - lower`; returns `(y, t)`.
fn max_slack(
    proj: &Projection,
    eta: &[f64],
    b: &BoxDomain,
    pinned: &[(usize, f64)],
) -> Result<(Vec<f64>, f64)> {
    let d = proj.d();
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::new(obj);
    push_fiber_rows(&mut lp, proj, eta, b, pinned, 1);
    for i in 0..d {
        if pinned.iter().any(|(j, _)| *j == i) {
            continue;
        }
        let mut a = vec![0.0; d + 1];
        a[i] = -1.0;
        a[d] = 1.0;
        lp.le.push((a, 0.0));
        let mut a = vec![0.0; d + 1];
        a[i] = 1.0;
        a[d] = 1.0;
        lp.le.push((a, b.width(i)));
    }
    let mut cap = vec![0.0; d + 1];
    cap[d] = 1.0;
    lp.le.push((cap, (0..d).map(|i| b.width(i)).fold(0.0, f64::max)));
    match lp.solve() {
        LpSolution::Optimal { x, .. } => {
            let t = if pinned.len() == d { 0.0 } else { x[d] };
            Ok((x[..d].to_vec(), t))
        }
        LpSolution::Infeasible => Err(Error::Infeasible(format!(
            "eta = {eta:?} is outside the image of the domain under the projection"
        ))),
        LpSolution::Unbounded => Err(Error::Numerical("max-slack LP reported unbounded".into())),
    }
}

/// `max sign * y_i` over the fiber.
fn coord_extreme(proj: &Projection, eta: &[f64], b: &BoxDomain, i: usize, sign: f64) -> Result<f64> {
    let d = proj.d();
    let mut obj = vec![0.0; d];
    obj[i] = sign;
    let mut lp = LinearProgram::new(obj);
    push_fiber_rows(&mut lp, proj, eta, b, &[], 0);
    match lp.solve() {
        LpSolution::Optimal { value, .. } => Ok(value),
        LpSolution::Infeasible => Err(Error::Infeasible(format!("eta = {eta:?} is infeasible"))),
        LpSolution::Unbounded => Err(Error::Numerical("coordinate LP reported unbounded".into())),
    }
}

fn push_fiber_rows(
    lp: &mut LinearProgram,
    proj: &Projection,
    eta: &[f64],
    b: &BoxDomain,
    pinned: &[(usize, f64)],
    extra: usize,
) {
    let d = proj.d();
    for k in 0..proj.p() {
        let mut a = vec![0.0; d + extra];
        let mut rhs = eta[k];
        for i in 0..d {
            a[i] = proj.psi[(i, k)];
            rhs -= proj.psi[(i, k)] * b.lower()[i];
        }
        lp.eq.push((a, rhs));
    }
    for i in 0..d {
        if let Some((_, v)) = pinned.iter().find(|(j, _)| *j == i) {
            let mut a = vec![0.0; d + extra];
            a[i] = 1.0;
            lp.eq.push((a, *v));
        } else {
            let mut a = vec![0.0; d + extra];
            a[i] = 1.0;
            lp.le.push((a, b.width(i)));
        }
    }
}
