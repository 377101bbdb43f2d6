//! Posterior quasi-realizations from pilot points and the bounds that
//! control their approximation error.

mod bounds;
mod pilots;

pub use bounds::{
    borell_tis_tail, bound_envelope, bound_envelope_inf, integrated_delta_variance, profile_envelope, quantile,
    sigma_delta_sq, sigma_delta_sq_box, sigma_delta_sq_curve, trapezoid, uq_profiles, BoundEnvelope, Envelope,
};
pub use pilots::{candidate_pool, select_pilot_points, PilotSelection, POOL_SIZE};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{GpModel, UkSystem};
use crate::linalg::cholesky_jittered;
use crate::optimize::Objective;
use crate::rng::{derive_seed, Stream};

/// `Z~(x) = Lambda(x)' [y; Z_G]`: universal kriging from the design and the
/// pilot points `G` under the prior kernel, driven by posterior draws of
/// `Z_G`. Its mean is the posterior mean, and `Z - Z~` has variance equal to
/// the kriging variance on the joint point set.
#[derive(Clone, Debug)]
pub struct ApproxProcess {
    model: GpModel,
    pilots: Vec<Vec<f64>>,
    joint: UkSystem,
    pilot_mean: DVector<f64>,
    /// Lower factor of the pilot posterior covariance (plus jitter).
    pilot_factor: DMatrix<f64>,
}

impl ApproxProcess {
    pub fn new(model: &GpModel, pilots: Vec<Vec<f64>>) -> Result<Self> {
        let d = model.dim();
        if pilots.is_empty() {
            return Err(Error::invalid("at least one pilot point is required"));
        }
        if pilots.iter().any(|g| g.len() != d || g.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("pilot points must be finite {d}-vectors")));
        }
        let mut all: Vec<Vec<f64>> = model.design().to_vec();
        all.extend(pilots.iter().cloned());
        for i in 0..all.len() {
            for j in 0..i {
                if all[i] == all[j] {
                    return Err(Error::invalid(format!("joint design rows {j} and {i} coincide")));
                }
            }
        }
        let joint = UkSystem::new(all, model.kernel().clone(), model.trend().clone())?;
        let pilot_mean = DVector::from_iterator(pilots.len(), pilots.iter().map(|g| model.posterior_mean(g)));
        let cov = model.system().covariance_matrix(&pilots);
        let (chol, _) = cholesky_jittered(cov, model.kernel().variance)?;
        Ok(ApproxProcess { model: model.clone(), pilots, joint, pilot_mean, pilot_factor: chol.l() })
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn pilots(&self) -> &[Vec<f64>] {
        &self.pilots
    }

    pub fn n_pilots(&self) -> usize {
        self.pilots.len()
    }

    pub fn joint_system(&self) -> &UkSystem {
        &self.joint
    }

    pub fn pilot_mean(&self) -> &DVector<f64> {
        &self.pilot_mean
    }

    pub fn pilot_factor(&self) -> &DMatrix<f64> {
        &self.pilot_factor
    }

    /// Weights `Lambda(x)` on `[y; Z_G]`.
    pub fn lambda(&self, x: &[f64]) -> DVector<f64> {
        self.joint.weights(x)
    }

    fn stacked(&self, sample: &[f64]) -> Result<DVector<f64>> {
        if sample.len() != self.pilots.len() {
            return Err(Error::invalid(format!(
                "sample has {} values for {} pilot points",
                sample.len(),
                self.pilots.len()
            )));
        }
        let y = self.model.observations();
        Ok(DVector::from_iterator(y.len() + sample.len(), y.iter().chain(sample).copied()))
    }

    /// The path driven by one vector of pilot values.
    pub fn realization(&self, sample: &[f64]) -> Result<Realization<'_>> {
        let v = self.stacked(sample)?;
        let (beta, alpha) = self.joint.solve_data(&v);
        Ok(Realization { proc: self, beta, alpha })
    }

    /// `K^Delta(x, x) = Var(Z_x - Z~_x)`, the kriging variance on the
    /// joint design.
    pub fn delta_variance(&self, x: &[f64]) -> f64 {
        self.joint.variance(x)
    }

    pub fn delta_variance_with_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        self.joint.variance_with_grad(x, g)
    }

    pub fn delta_covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.joint.covariance(x, y)
    }

    /// `K^Delta(x, y)` assembled term by term from posterior covariances,
    /// with `b(.)` the pilot block of `Lambda(.)`.
    pub fn delta_covariance_direct(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.model.n();
        let bx = self.lambda(x).rows(n, self.pilots.len()).into_owned();
        let by = self.lambda(y).rows(n, self.pilots.len()).into_owned();
        let m = &self.model;
        let kxg = DVector::from_iterator(self.pilots.len(), self.pilots.iter().map(|g| m.posterior_cov(x, g)));
        let kyg = DVector::from_iterator(self.pilots.len(), self.pilots.iter().map(|g| m.posterior_cov(y, g)));
        let kgg = m.system().covariance_matrix(&self.pilots);
        m.posterior_cov(x, y) - kyg.dot(&bx) - kxg.dot(&by) + bx.dot(&(kgg * &by))
    }

    /// `mu^Delta(x) = mu_n(x) - Lambda(x)' [y; E Z_G]`.
    pub fn delta_mean(&self, x: &[f64]) -> f64 {
        let v = self.stacked(self.pilot_mean.as_slice()).expect("pilot mean has the right length");
        self.model.posterior_mean(x) - self.lambda(x).dot(&v)
    }
}

/// One quasi-realization; evaluation costs one kernel row.
pub struct Realization<'a> {
    proc: &'a ApproxProcess,
    beta: DVector<f64>,
    alpha: DVector<f64>,
}

impl Realization<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.proc.joint.predict(&self.beta, &self.alpha, x)
    }

    pub fn grad(&self, x: &[f64], g: &mut [f64]) {
        self.proc.joint.predict_grad(&self.beta, &self.alpha, x, g)
    }
}

impl Objective for Realization<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> bool {
        self.grad(x, g);
        true
    }
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        Some(self.proc.joint.predict_with_grad(&self.beta, &self.alpha, x, g))
    }
}

/// Posterior draws of the pilot values.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationSet {
    /// `s` vectors of length `l`.
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
}

impl RealizationSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Source of the standard normal vectors behind each draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    Gaussian,
    /// Every draw equals the posterior mean.
    Zero,
}

/// `s` draws `mean + L eps`; draw `r` uses the ChaCha20 stream
/// `derive_seed(seed, r)`.
pub fn simulate_realizations(proc: &ApproxProcess, s: usize, seed: u64) -> RealizationSet {
    simulate_with(proc, s, seed, Noise::Gaussian)
}

pub fn simulate_with(proc: &ApproxProcess, s: usize, seed: u64, noise: Noise) -> RealizationSet {
    let l = proc.n_pilots();
    let samples = (0..s)
        .map(|r| {
            let eps = match noise {
                Noise::Gaussian => {
                    let mut st = Stream::new(derive_seed(seed, r as u64));
                    DVector::from_iterator(l, (0..l).map(|_| st.normal()))
                }
                Noise::Zero => DVector::zeros(l),
            };
            (&proc.pilot_mean + &proc.pilot_factor * eps).iter().copied().collect()
        })
        .collect();
    RealizationSet { samples, seed }
}
