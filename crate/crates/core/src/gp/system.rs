//! Factorized universal-kriging system on a fixed set of points.
//!
//! Shared by the posterior of the fitted model and by the augmented
//! design (data plus pilot points) of the approximating process.

use nalgebra::{DMatrix, DVector};

use super::{KernelSpec, TrendBasis};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, cholesky_with_nugget, numerical_rank, solve_lower, solve_lower_mat, Chol};

#[derive(Clone, Debug)]
pub struct UkSystem {
    pts: Vec<Vec<f64>>,
    kernel: KernelSpec,
    trend: TrendBasis,
    nugget: f64,
    chol: Chol,
    h: DMatrix<f64>,
    /// `L^-1 H`.
    w: DMatrix<f64>,
    /// Cholesky factor of `W'W = H' K^-1 H`.
    m_chol: Chol,
}

pub(crate) fn kernel_matrix(kernel: &KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel.eval(&a[i], &b[j]))
}

pub(crate) fn kernel_matrix_sym(kernel: &KernelSpec, a: &[Vec<f64>]) -> DMatrix<f64> {
    let n = a.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.variance;
        for j in 0..i {
            let v = kernel.eval(&a[i], &a[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

impl UkSystem {
    /// Factorizes `K(X, X)` with adaptive jitter.
    pub fn new(pts: Vec<Vec<f64>>, kernel: KernelSpec, trend: TrendBasis) -> Result<Self> {
        validate(&pts, &kernel, &trend)?;
        let k = kernel_matrix_sym(&kernel, &pts);
        let (chol, nugget) = cholesky_jittered(k, kernel.variance)?;
        Self::finish(pts, kernel, trend, chol, nugget)
    }

    /// Factorizes `K(X, X) + nugget I` with a known nugget.
    pub fn with_nugget(
        pts: Vec<Vec<f64>>,
        kernel: KernelSpec,
        trend: TrendBasis,
        nugget: f64,
    ) -> Result<Self> {
        validate(&pts, &kernel, &trend)?;
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::invalid(format!("nugget must be nonnegative, got {nugget}")));
        }
        let k = kernel_matrix_sym(&kernel, &pts);
        let chol = cholesky_with_nugget(k, nugget)?;
        Self::finish(pts, kernel, trend, chol, nugget)
    }

    fn finish(
        pts: Vec<Vec<f64>>,
        kernel: KernelSpec,
        trend: TrendBasis,
        chol: Chol,
        nugget: f64,
    ) -> Result<Self> {
        let h = trend.design_matrix(&pts);
        if numerical_rank(&h, 1e-10) < trend.len() {
            return Err(Error::Model("trend design matrix is rank deficient on the design".into()));
        }
        let w = solve_lower_mat(&chol, &h);
        let m_chol = (w.transpose() * &w)
            .cholesky()
            .ok_or_else(|| Error::Model("H' K^-1 H is not positive definite".into()))?;
        Ok(UkSystem { pts, kernel, trend, nugget, chol, h, w, m_chol })
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.pts
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn trend(&self) -> &TrendBasis {
        &self.trend
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// `(H' K^-1 H)^-1`.
    pub fn trend_precision_inverse(&self) -> DMatrix<f64> {
        self.m_chol.inverse()
    }

    pub fn kvec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.pts.len(), self.pts.iter().map(|p| self.kernel.eval(x, p)))
    }

    /// GLS coefficients and weights for data `v` on the points:
    /// `beta = (H'K^-1H)^-1 H'K^-1 v`, `alpha = K^-1 (v - H beta)`.
    pub fn solve_data(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let z = solve_lower(&self.chol, v);
        let beta = self.m_chol.solve(&(self.w.transpose() * &z));
        let r = z - &self.w * &beta;
        let alpha = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&r)
            .expect("nonzero diagonal");
        (beta, alpha)
    }

    /// `h(x)' beta + k(x)' alpha`.
    pub fn predict(&self, beta: &DVector<f64>, alpha: &DVector<f64>, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (t, b) in self.trend.eval(x).iter().zip(beta.iter()) {
            s += t * b;
        }
        for (p, a) in self.pts.iter().zip(alpha.iter()) {
            s += a * self.kernel.eval(x, p);
        }
        s
    }

    pub fn predict_grad(&self, beta: &DVector<f64>, alpha: &DVector<f64>, x: &[f64], g: &mut [f64]) {
        let jh = self.trend.jacobian(x);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = (0..beta.len()).map(|k| jh[(i, k)] * beta[k]).sum();
        }
        let mut gk = vec![0.0; x.len()];
        for (p, a) in self.pts.iter().zip(alpha.iter()) {
            self.kernel.grad_x(x, p, &mut gk);
            for (gi, v) in g.iter_mut().zip(&gk) {
                *gi += a * v;
            }
        }
    }

    /// Value and gradient of the predictor together.
    pub fn predict_with_grad(
        &self,
        beta: &DVector<f64>,
        alpha: &DVector<f64>,
        x: &[f64],
        g: &mut [f64],
    ) -> f64 {
        let jh = self.trend.jacobian(x);
        let hx = self.trend.eval(x);
        let mut s: f64 = hx.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = (0..beta.len()).map(|k| jh[(i, k)] * beta[k]).sum();
        }
        let mut gk = vec![0.0; x.len()];
        for (p, a) in self.pts.iter().zip(alpha.iter()) {
            s += a * self.kernel.eval(x, p);
            self.kernel.grad_x(x, p, &mut gk);
            for (gi, v) in g.iter_mut().zip(&gk) {
                *gi += a * v;
            }
        }
        s
    }

    fn lambda(&self, x: &[f64], v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.trend.eval(x)) - self.w.transpose() * v
    }

    /// Posterior covariance `K_n(x, x2)`.
    pub fn covariance(&self, x: &[f64], x2: &[f64]) -> f64 {
        let v1 = solve_lower(&self.chol, &self.kvec(x));
        let v2 = solve_lower(&self.chol, &self.kvec(x2));
        let l1 = self.lambda(x, &v1);
        let l2 = self.lambda(x2, &v2);
        self.kernel.eval(x, x2) - v1.dot(&v2) + l1.dot(&self.m_chol.solve(&l2))
    }

    /// Posterior variance, clamped at zero.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let v = solve_lower(&self.chol, &self.kvec(x));
        let l = self.lambda(x, &v);
        (self.kernel.variance - v.norm_squared() + l.dot(&self.m_chol.solve(&l))).max(0.0)
    }

    /// Posterior variance (unclamped) and its gradient.
    pub fn variance_with_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let kx = self.kvec(x);
        let v = solve_lower(&self.chol, &kx);
        let lam = self.lambda(x, &v);
        let r = self.m_chol.solve(&lam);
        let var = self.kernel.variance - v.norm_squared() + lam.dot(&r);
        // Kriging weights K^-1 k + K^-1 H M lambda.
        let t = v + &self.w * &r;
        let wts = self.chol.l_dirty().tr_solve_lower_triangular(&t).expect("nonzero diagonal");
        let jh = self.trend.jacobian(x);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = 2.0 * (0..r.len()).map(|k| jh[(i, k)] * r[k]).sum::<f64>();
        }
        let mut gk = vec![0.0; x.len()];
        for (p, wi) in self.pts.iter().zip(wts.iter()) {
            self.kernel.grad_x(x, p, &mut gk);
            for (gi, v) in g.iter_mut().zip(&gk) {
                *gi -= 2.0 * wi * v;
            }
        }
        var
    }

    /// Kriging weights `Lambda(x)`: the predictor at `x` is `Lambda(x)' v`.
    pub fn weights(&self, x: &[f64]) -> DVector<f64> {
        let v = solve_lower(&self.chol, &self.kvec(x));
        let lam = self.lambda(x, &v);
        let r = self.m_chol.solve(&lam);
        let t = v + &self.w * &r;
        self.chol.l_dirty().tr_solve_lower_triangular(&t).expect("nonzero diagonal")
    }

    /// Posterior covariance matrix among `q`.
    pub fn covariance_matrix(&self, q: &[Vec<f64>]) -> DMatrix<f64> {
        let kq = kernel_matrix(&self.kernel, &self.pts, q);
        let v = solve_lower_mat(&self.chol, &kq);
        let hq = self.trend.design_matrix(q);
        let lam = hq.transpose() - self.w.transpose() * &v;
        let mlam = self.m_chol.solve(&lam);
        let mut c = kernel_matrix_sym(&self.kernel, q) - v.transpose() * &v + lam.transpose() * mlam;
        // Symmetrize rounding.
        for i in 0..c.nrows() {
            for j in 0..i {
                let a = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = a;
                c[(j, i)] = a;
            }
        }
        c
    }

    /// Diagonal of `Q = K^-1 - K^-1 H (H'K^-1H)^-1 H' K^-1`.
    /// Columns `v_j = L^-1 k(q_j)`, `lambda_j` and `M lambda_j`, from which
    /// `cov(q_a, q_b) = k(q_a, q_b) - v_a'v_b + lambda_a' M lambda_b`.
    pub(crate) fn features(&self, q: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let v = solve_lower_mat(&self.chol, &kernel_matrix(&self.kernel, &self.pts, q));
        let lam = self.trend.design_matrix(q).transpose() - self.w.transpose() * &v;
        let mlam = self.m_chol.solve(&lam);
        (v, lam, mlam)
    }

    pub(crate) fn q_diagonal(&self) -> DVector<f64> {
        let kinv = self.chol.inverse();
        let kih = &kinv * &self.h;
        let m = self.m_chol.inverse();
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|i| {
                let row = kih.row(i);
                kinv[(i, i)] - (row * &m * row.transpose())[(0, 0)]
            }),
        )
    }
}

fn validate(pts: &[Vec<f64>], kernel: &KernelSpec, trend: &TrendBasis) -> Result<()> {
    let d = kernel.dim();
    if pts.is_empty() {
        return Err(Error::invalid("no design points"));
    }
    if pts.len() < trend.len() {
        return Err(Error::InsufficientData { needed: trend.len(), got: pts.len() });
    }
    trend.check_dim(d)?;
    for p in pts {
        if p.len() != d {
            return Err(Error::invalid(format!(
                "design point of dimension {} for a {d}-dimensional kernel",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite design coordinate"));
        }
    }
    Ok(())
}
