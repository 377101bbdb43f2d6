//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Chol = Cholesky<f64, Dyn>;

/// Jitter schedule relative to `scale`: 1e-10, 1e-9, ..., 1e-4.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky factorization with adaptive diagonal jitter.
///
/// Returns the factor together with the absolute jitter that was added.
pub fn cholesky_jittered(mut m: DMatrix<f64>, scale: f64) -> Result<(Chol, f64)> {
    let n = m.nrows();
    let mut rel = JITTER_START;
    let mut added = 0.0;
    loop {
        let nugget = rel * scale;
        for i in 0..n {
            m[(i, i)] += nugget - added;
        }
        added = nugget;
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Ok((ch, nugget));
        }
        if rel >= JITTER_MAX * (1.0 - 1e-12) {
            return Err(Error::Numerical(format!(
                "Cholesky failed on {n}x{n} matrix after jitter escalation to {nugget:e}"
            )));
        }
        rel *= 10.0;
    }
}

/// Cholesky with a fixed, already known jitter.
pub fn cholesky_with_nugget(mut m: DMatrix<f64>, nugget: f64) -> Result<Chol> {
    for i in 0..m.nrows() {
        m[(i, i)] += nugget;
    }
    Cholesky::new(m).ok_or_else(|| Error::Numerical("Cholesky failed at stored nugget".into()))
}

/// Solves `L x = b` for the lower factor.
pub fn solve_lower(ch: &Chol, b: &DVector<f64>) -> DVector<f64> {
    ch.l_dirty()
        .solve_lower_triangular(b)
        .expect("Cholesky factor has a nonzero diagonal")
}

pub fn solve_lower_mat(ch: &Chol, b: &DMatrix<f64>) -> DMatrix<f64> {
    ch.l_dirty()
        .solve_lower_triangular(b)
        .expect("Cholesky factor has a nonzero diagonal")
}

/// Numerical rank of a tall matrix via its singular values.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal completion: given vectors spanning a subspace, returns an
/// orthonormal basis of its orthogonal complement in `R^d`.
///
/// Canonical unit vectors are added greedily (largest residual first) and
/// each resulting column is signed so that its first nonzero entry is
/// positive, so the output is a deterministic function of the input span.
pub fn orthogonal_complement(span: &[DVector<f64>], d: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let push = |basis: &mut Vec<DVector<f64>>, v: &DVector<f64>| -> bool {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dot(&r);
                r.axpy(-c, b, 1.0);
            }
        }
        let nr = r.norm();
        if nr > 1e-10 * v.norm().max(1e-300) {
            basis.push(r / nr);
            true
        } else {
            false
        }
    };
    for v in span {
        push(&mut basis, v);
    }
    let rank = basis.len();
    let mut complement = Vec::new();
    while basis.len() < d {
        // Pick the canonical vector with the largest residual.
        let mut best = (0usize, -1.0f64);
        for j in 0..d {
            let mut r = DVector::<f64>::zeros(d);
            r[j] = 1.0;
            for b in basis.iter() {
                let c = b[j];
                r.axpy(-c, b, 1.0);
            }
            let nr = r.norm();
            if nr > best.1 + 1e-12 {
                best = (j, nr);
            }
        }
        let mut e = DVector::<f64>::zeros(d);
        e[best.0] = 1.0;
        if !push(&mut basis, &e) {
            break;
        }
        complement.push(basis.last().unwrap().clone());
    }
    debug_assert_eq!(rank + complement.len(), basis.len());
    let mut out = DMatrix::<f64>::zeros(d, complement.len());
    for (k, mut c) in complement.into_iter().enumerate() {
        if let Some(first) = c.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                c = -c;
            }
        }
        out.set_column(k, &c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_matrix() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let (_, nugget) = cholesky_jittered(m, 1.0).unwrap();
        assert!(nugget > 0.0 && nugget <= JITTER_MAX);
    }

    #[test]
    fn jitter_gives_up() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(cholesky_jittered(m, 1.0).is_err());
    }

    #[test]
    fn complement_of_axis() {
        let mut e1 = DVector::zeros(3);
        e1[0] = 1.0;
        let n = orthogonal_complement(&[e1], 3);
        assert_eq!(n.ncols(), 2);
        assert!((n[(1, 0)] - 1.0).abs() < 1e-15 && (n[(2, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_of_diagonal() {
        let v = DVector::from_vec(vec![1.0, 1.0]) / 2f64.sqrt();
        let n = orthogonal_complement(&[v], 2);
        let s = 1.0 / 2f64.sqrt();
        assert!((n[(0, 0)] - s).abs() < 1e-15 && (n[(1, 0)] + s).abs() < 1e-15);
    }
}
