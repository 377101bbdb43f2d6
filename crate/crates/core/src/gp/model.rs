//! Fitted universal-kriging emulator.

use nalgebra::DVector;

use super::mle::{self, FitConfig};
use super::system::UkSystem;
use super::{KernelFamily, KernelSpec, TrendBasis};
use crate::error::{Error, Result};
use crate::optimize::Objective;

/// Noiseless universal-kriging posterior given data on a design.
#[derive(Clone, Debug)]
pub struct GpModel {
    sys: UkSystem,
    y: DVector<f64>,
    coef: DVector<f64>,
    alpha: DVector<f64>,
}

fn check_unit_box(design: &[Vec<f64>]) -> Result<()> {
    for (i, p) in design.iter().enumerate() {
        if p.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(Error::invalid(format!(
                "design point {i} lies outside the unit hyper-rectangle; normalize inputs first"
            )));
        }
    }
    Ok(())
}

fn check_distinct(design: &[Vec<f64>]) -> Result<()> {
    let mut idx: Vec<usize> = (0..design.len()).collect();
    idx.sort_by(|&a, &b| {
        design[a].iter().zip(&design[b]).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y)))
    });
    for w in idx.windows(2) {
        if design[w[0]] == design[w[1]] {
            return Err(Error::invalid(format!("design points {} and {} coincide", w[0], w[1])));
        }
    }
    Ok(())
}

impl GpModel {
    /// Conditions on data at fixed hyperparameters.
    pub fn condition(
        design: Vec<Vec<f64>>,
        values: Vec<f64>,
        kernel: KernelSpec,
        trend: TrendBasis,
    ) -> Result<Self> {
        Self::check_inputs(&design, &values)?;
        let sys = UkSystem::new(design, kernel, trend)?;
        Ok(Self::from_system(sys, DVector::from_vec(values)))
    }

    /// As [`GpModel::condition`] with a known diagonal nugget.
    pub fn condition_with_nugget(
        design: Vec<Vec<f64>>,
        values: Vec<f64>,
        kernel: KernelSpec,
        trend: TrendBasis,
        nugget: f64,
    ) -> Result<Self> {
        Self::check_inputs(&design, &values)?;
        let sys = UkSystem::with_nugget(design, kernel, trend, nugget)?;
        Ok(Self::from_system(sys, DVector::from_vec(values)))
    }

    /// Maximum-likelihood fit of the lengthscales and process variance.
    pub fn fit(
        design: Vec<Vec<f64>>,
        values: Vec<f64>,
        family: KernelFamily,
        trend: TrendBasis,
        cfg: &FitConfig,
    ) -> Result<Self> {
        Self::check_inputs(&design, &values)?;
        if design.len() <= trend.len() {
            return Err(Error::InsufficientData { needed: trend.len() + 1, got: design.len() });
        }
        let kernel = mle::estimate(&design, &values, family, &trend, cfg)?;
        Self::condition(design, values, kernel, trend)
    }

    fn check_inputs(design: &[Vec<f64>], values: &[f64]) -> Result<()> {
        if design.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} design points but {} observations",
                design.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        check_unit_box(design)?;
        check_distinct(design)
    }

    fn from_system(sys: UkSystem, y: DVector<f64>) -> Self {
        let (coef, alpha) = sys.solve_data(&y);
        GpModel { sys, y, coef, alpha }
    }

    pub fn system(&self) -> &UkSystem {
        &self.sys
    }

    pub fn design(&self) -> &[Vec<f64>] {
        self.sys.points()
    }

    pub fn observations(&self) -> &[f64] {
        self.y.as_slice()
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.sys.kernel()
    }

    pub fn trend(&self) -> &TrendBasis {
        self.sys.trend()
    }

    /// GLS trend coefficients.
    pub fn coefficients(&self) -> &[f64] {
        self.coef.as_slice()
    }

    /// `K^-1 (y - H c)`.
    pub fn weights(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    pub fn nugget(&self) -> f64 {
        self.sys.nugget()
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn n(&self) -> usize {
        self.sys.len()
    }

    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        self.sys.predict(&self.coef, &self.alpha, x)
    }

    pub fn posterior_mean_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.sys.predict_grad(&self.coef, &self.alpha, x, &mut g);
        g
    }

    pub fn posterior_mean_with_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        self.sys.predict_with_grad(&self.coef, &self.alpha, x, g)
    }

    pub fn posterior_cov(&self, x: &[f64], x2: &[f64]) -> f64 {
        let c = self.sys.covariance(x, x2);
        if x == x2 {
            c.max(0.0)
        } else {
            c
        }
    }

    pub fn posterior_var(&self, x: &[f64]) -> f64 {
        self.sys.variance(x)
    }

    /// Leave-one-out residuals `y_i - mu_{-i}(x_i)` by the virtual
    /// cross-validation identity.
    pub fn loo_residuals(&self) -> Vec<f64> {
        let q = self.sys.q_diagonal();
        self.alpha.iter().zip(q.iter()).map(|(a, qi)| a / qi).collect()
    }

    /// Leave-one-out Q².
    pub fn loo_q2(&self) -> Result<f64> {
        let res = self.loo_residuals();
        let pred: Vec<f64> = self.y.iter().zip(&res).map(|(y, e)| y - e).collect();
        q2_score(&pred, self.y.as_slice())
    }

    /// Hold-out Q² on a test set.
    pub fn q2(&self, test_design: &[Vec<f64>], test_values: &[f64]) -> Result<f64> {
        if test_design.len() != test_values.len() {
            return Err(Error::invalid("test design and values differ in length"));
        }
        let pred: Vec<f64> = test_design.iter().map(|x| self.posterior_mean(x)).collect();
        q2_score(&pred, test_values)
    }
}

/// The posterior mean as an objective.
impl Objective for GpModel {
    fn value(&self, x: &[f64]) -> f64 {
        self.posterior_mean(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        self.sys.predict_grad(&self.coef, &self.alpha, x, g);
        true
    }
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        Some(self.posterior_mean_with_grad(x, g))
    }
}

/// `1 - sum (pred - y)^2 / sum (y - mean y)^2`.
pub fn q2_score(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid("predictions and values differ in length"));
    }
    if truth.len() < 2 {
        return Err(Error::UndefinedMetric("Q2 needs at least two test values".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("test values have zero variance".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelStructure;
    use crate::rng::Stream;
    use nalgebra::DMatrix;

    fn toy_1d(seed: u64, n: usize) -> GpModel {
        let mut rng = Stream::new(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + rng.uniform()) / n as f64]).collect();
        let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).sin() + p[0]).collect();
        let k = KernelSpec::tensor(KernelFamily::Matern52, vec![0.3], 1.3).unwrap();
        GpModel::condition(x, y, k, TrendBasis::linear(1)).unwrap()
    }

    /// Dense oracle: explicit inverses of K and H'K^-1H.
    fn dense_mean_cov(m: &GpModel, x: &[f64], x2: &[f64]) -> (f64, f64) {
        let pts = m.design();
        let k = m.kernel();
        let n = pts.len();
        let kk = DMatrix::from_fn(n, n, |i, j| k.eval(&pts[i], &pts[j]) + if i == j { m.nugget() } else { 0.0 });
        let kinv = kk.try_inverse().unwrap();
        let h = m.trend().design_matrix(pts);
        let a = (h.transpose() * &kinv * &h).try_inverse().unwrap();
        let y = DVector::from_column_slice(m.observations());
        let c = &a * h.transpose() * &kinv * &y;
        let kx = DVector::from_iterator(n, pts.iter().map(|p| k.eval(x, p)));
        let kx2 = DVector::from_iterator(n, pts.iter().map(|p| k.eval(x2, p)));
        let hx = DVector::from_vec(m.trend().eval(x));
        let hx2 = DVector::from_vec(m.trend().eval(x2));
        let mean = hx.dot(&c) + (kx.transpose() * &kinv * (y - &h * &c))[(0, 0)];
        let l1 = hx.transpose() - kx.transpose() * &kinv * &h;
        let l2 = hx2.transpose() - kx2.transpose() * &kinv * &h;
        let cov = k.eval(x, x2) - (kx.transpose() * &kinv * &kx2)[(0, 0)] + (l1 * a * l2.transpose())[(0, 0)];
        (mean, cov)
    }

    #[test]
    fn interpolates_training_data() {
        let m = toy_1d(1, 8);
        let range = 2.0;
        for (x, y) in m.design().iter().zip(m.observations()) {
            assert!((m.posterior_mean(x) - y).abs() <= 1e-6 * range);
            assert!(m.posterior_var(x) <= 1e-6 * m.kernel().variance);
        }
    }

    #[test]
    fn matches_dense_oracle() {
        let m = toy_1d(2, 5);
        let mut rng = Stream::new(9);
        for _ in 0..20 {
            let (x, x2) = (vec![rng.uniform()], vec![rng.uniform()]);
            let (mean, cov) = dense_mean_cov(&m, &x, &x2);
            assert!((m.posterior_mean(&x) - mean).abs() <= 1e-10 * mean.abs().max(1.0));
            assert!((m.posterior_cov(&x, &x2) - cov).abs() <= 1e-10 * m.kernel().variance);
        }
    }

    #[test]
    fn constant_data_gives_constant_mean() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i * i) as f64 / 25.0]).collect();
        let k = KernelSpec::tensor(KernelFamily::Matern32, vec![0.4, 0.4], 1.0).unwrap();
        let m = GpModel::condition(x, vec![2.5; 6], k, TrendBasis::constant()).unwrap();
        for p in [[0.33, 0.81], [0.0, 1.0], [0.5, 0.5]] {
            assert!((m.posterior_mean(&p) - 2.5).abs() < 1e-10);
            assert!(m.posterior_mean_grad(&p).iter().all(|g| g.abs() < 1e-9));
        }
    }

    #[test]
    fn one_point_ordinary_kriging_variance() {
        let x1 = vec![0.4];
        let k = KernelSpec::tensor(KernelFamily::Gaussian, vec![0.25], 2.0).unwrap();
        let m = GpModel::condition_with_nugget(vec![x1.clone()], vec![1.0], k.clone(), TrendBasis::constant(), 0.0)
            .unwrap();
        for x in [0.0, 0.3, 0.9] {
            let kx = k.eval(&[x], &x1);
            let k11 = k.eval(&x1, &x1);
            let lam = 1.0 - kx / k11;
            let expected = k.eval(&[x], &[x]) - kx * kx / k11 + lam * lam / (1.0 / k11);
            assert!((m.posterior_var(&[x]) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_gradient_matches_differences() {
        let m = toy_1d(3, 7);
        let mut rng = Stream::new(4);
        for _ in 0..50 {
            let x = rng.uniform();
            if m.design().iter().any(|p| (p[0] - x).abs() < 1e-3) {
                continue;
            }
            let h = 1e-6;
            let fd = (m.posterior_mean(&[x + h]) - m.posterior_mean(&[x - h])) / (2.0 * h);
            let g = m.posterior_mean_grad(&[x])[0];
            assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-2), "{g} {fd}");
        }
    }

    #[test]
    fn variance_gradient_matches_differences() {
        let x: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![0.8, 0.3], vec![0.5, 0.9], vec![0.3, 0.6]];
        let k = KernelSpec::new(KernelFamily::Matern52, vec![0.3, 0.5], 1.0, KernelStructure::Isotropic).unwrap();
        let m = GpModel::condition(x, vec![0.0, 1.0, 0.5, 0.2], k, TrendBasis::linear(2)).unwrap();
        let p = [0.45, 0.4];
        let mut g = [0.0; 2];
        m.system().variance_with_grad(&p, &mut g);
        for i in 0..2 {
            let h = 1e-6;
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (m.posterior_var(&a) - m.posterior_var(&b)) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6, "{} {fd}", g[i]);
        }
    }

    #[test]
    fn far_field_gradient_vanishes() {
        let m = toy_1d(5, 6);
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![0.02], vec![0.04]];
        let k = KernelSpec::tensor(KernelFamily::Matern32, vec![0.05], 1.0).unwrap();
        let far = GpModel::condition(x, vec![0.0, 1.0, -1.0], k, TrendBasis::constant()).unwrap();
        assert!(far.posterior_mean_grad(&[0.95])[0].abs() <= 1e-6 * 2.0);
        let _ = m;
    }

    #[test]
    fn loo_matches_explicit_refits() {
        let m = toy_1d(6, 9);
        let res = m.loo_residuals();
        for i in 0..m.n() {
            let mut x = m.design().to_vec();
            let mut y = m.observations().to_vec();
            let xi = x.remove(i);
            let yi = y.remove(i);
            let sub = GpModel::condition_with_nugget(x, y, m.kernel().clone(), m.trend().clone(), m.nugget())
                .unwrap();
            assert!((yi - sub.posterior_mean(&xi) - res[i]).abs() < 1e-7, "{i}");
        }
    }

    #[test]
    fn q2_definition() {
        assert_eq!(q2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(q2_score(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((q2_score(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(q2_score(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rejects_bad_designs() {
        let k = KernelSpec::tensor(KernelFamily::Matern32, vec![0.4], 1.0).unwrap();
        assert!(GpModel::condition(vec![vec![0.1], vec![1.5]], vec![0.0, 1.0], k.clone(), TrendBasis::constant()).is_err());
        assert!(GpModel::condition(vec![vec![0.1], vec![0.1]], vec![0.0, 1.0], k.clone(), TrendBasis::constant()).is_err());
        // x and x^2 coincide on {0, 1}.
        let bad_trend = TrendBasis::new(vec![crate::gp::TrendTerm::Linear(0), crate::gp::TrendTerm::Square(0)]).unwrap();
        assert!(matches!(
            GpModel::condition(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], k, bad_trend),
            Err(Error::Model(_))
        ));
    }
}
