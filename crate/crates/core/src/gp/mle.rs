//! Concentrated maximum likelihood for the kernel hyperparameters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::system::kernel_matrix_sym;
use super::{KernelFamily, KernelSpec, KernelStructure, TrendBasis};
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, numerical_rank, solve_lower, solve_lower_mat};
use crate::optimize::{lbfgsb_minimize, BoxDomain, LbfgsbConfig, Objective};

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub structure: KernelStructure,
    pub n_starts: usize,
    /// Range of the Latin-hypercube starts for each log-lengthscale.
    pub start_range: (f64, f64),
    /// Optimization box for each log-lengthscale.
    pub bounds: (f64, f64),
    pub seed: u64,
    pub optimizer: LbfgsbConfig,
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            structure: KernelStructure::TensorProduct,
            n_starts: 10,
            start_range: (1e-2f64.ln(), 2f64.ln()),
            bounds: (1e-3f64.ln(), 10f64.ln()),
            seed: 0,
            optimizer: LbfgsbConfig::default(),
            parallel: true,
        }
    }
}

/// `-2 log L` with trend and variance profiled out, and its gradient in the
/// log-lengthscales. Constant terms are dropped.
#[derive(Clone, Debug)]
pub struct Likelihood<'a> {
    pts: &'a [Vec<f64>],
    y: DVector<f64>,
    family: KernelFamily,
    structure: KernelStructure,
    h: DMatrix<f64>,
    y_scale: f64,
}

pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub sigma2: f64,
}

impl<'a> Likelihood<'a> {
    pub fn new(
        pts: &'a [Vec<f64>],
        y: &[f64],
        family: KernelFamily,
        structure: KernelStructure,
        trend: &TrendBasis,
    ) -> Result<Self> {
        let h = trend.design_matrix(pts);
        if numerical_rank(&h, 1e-10) < trend.len() {
            return Err(Error::Model("trend design matrix is rank deficient on the design".into()));
        }
        let y_scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(1.0);
        Ok(Likelihood { pts, y: DVector::from_column_slice(y), family, structure, h, y_scale })
    }

    pub fn eval(&self, log_ls: &[f64]) -> Result<LikelihoodEval> {
        let n = self.pts.len();
        let d = log_ls.len();
        let ls: Vec<f64> = log_ls.iter().map(|v| v.exp()).collect();
        let k = KernelSpec::new(self.family, ls, 1.0, self.structure)?;
        let r = kernel_matrix_sym(&k, self.pts);
        let (chol, _) = cholesky_jittered(r, 1.0)?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let w = solve_lower_mat(&chol, &self.h);
        let z = solve_lower(&chol, &self.y);
        let wtw = w.transpose() * &w;
        let c = wtw
            .cholesky()
            .ok_or_else(|| Error::Model("H' R^-1 H is not positive definite".into()))?
            .solve(&(w.transpose() * &z));
        let res = z - &w * c;
        let sigma2 = (res.norm_squared() / n as f64).max(1e-30 * self.y_scale);
        let value = n as f64 * sigma2.ln() + logdet;
        let alpha = chol.l_dirty().tr_solve_lower_triangular(&res).expect("nonzero diagonal");
        let rinv = chol.inverse();

        let mut gradient = vec![0.0; d];
        let mut dk = vec![0.0; d];
        for i in 0..n {
            for j in 0..i {
                k.correlation_dlog(&self.pts[i], &self.pts[j], &mut dk);
                for (l, g) in gradient.iter_mut().enumerate() {
                    // Symmetric pair counted twice.
                    *g += 2.0 * dk[l] * (rinv[(i, j)] - alpha[i] * alpha[j] / sigma2);
                }
            }
        }
        Ok(LikelihoodEval { value, gradient, sigma2 })
    }
}

impl Objective for Likelihood<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).map(|e| e.value).unwrap_or(1e300)
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        self.value_and_gradient(x, g);
        true
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        match self.eval(x) {
            Ok(e) => {
                g.copy_from_slice(&e.gradient);
                Some(e.value)
            }
            Err(_) => {
                g.iter_mut().for_each(|v| *v = 0.0);
                Some(1e300)
            }
        }
    }
}

/// Multi-start estimate of the kernel; returns the fitted spec.
pub(crate) fn estimate(
    pts: &[Vec<f64>],
    y: &[f64],
    family: KernelFamily,
    trend: &TrendBasis,
    cfg: &FitConfig,
) -> Result<KernelSpec> {
    let d = pts[0].len();
    let lik = Likelihood::new(pts, y, family, cfg.structure, trend)?;
    let (lo, hi) = cfg.bounds;
    let bounds = BoxDomain::new(vec![lo; d], vec![hi; d])?;
    let (s0, s1) = cfg.start_range;
    let starts: Vec<Vec<f64>> = latin_hypercube(cfg.n_starts.max(1), d, cfg.seed)
        .into_iter()
        .map(|u| u.iter().map(|t| (s0 + t * (s1 - s0)).clamp(lo, hi)).collect())
        .collect();

    let run = |s: &Vec<f64>| lbfgsb_minimize(&lik, &bounds, s, &cfg.optimizer);
    let results: Vec<_> = if cfg.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(r) if r.f < 1e300 => {
                if best.as_ref().is_none_or(|b| r.f < b.0 - 1e-10 * b.0.abs().max(1.0)) {
                    best = Some((r.f, r.x));
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let Some((_, x)) = best else {
        return Err(last_err.unwrap_or_else(|| {
            Error::Numerical("likelihood could not be evaluated at any start".into())
        }));
    };
    let sigma2 = lik.eval(&x)?.sigma2;
    log::debug!("mle: log-lengthscales {x:?}, variance {sigma2:e}");
    KernelSpec::new(family, x.iter().map(|v| v.exp()).collect(), sigma2, cfg.structure)
}
