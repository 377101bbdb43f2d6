//! Stationary covariance kernels with gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern32,
    Matern52,
    Gaussian,
}

impl KernelFamily {
    /// Unit-variance correlation as a function of the scaled distance `r`.
    #[inline]
    pub fn phi(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern32 => (1.0 + SQRT3 * r) * (-SQRT3 * r).exp(),
            KernelFamily::Matern52 => (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp(),
            KernelFamily::Gaussian => (-0.5 * r * r).exp(),
        }
    }

    /// `phi'(r) / r`, finite at `r = 0` for all three families.
    #[inline]
    pub fn psi(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern32 => -3.0 * (-SQRT3 * r).exp(),
            KernelFamily::Matern52 => -5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp(),
            KernelFamily::Gaussian => -(-0.5 * r * r).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Gaussian => "gaussian",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "matern32" | "matern3_2" => Some(KernelFamily::Matern32),
            "matern52" | "matern5_2" => Some(KernelFamily::Matern52),
            "gaussian" | "gauss" => Some(KernelFamily::Gaussian),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelStructure {
    /// Product of one-dimensional correlations.
    TensorProduct,
    /// Correlation of the lengthscale-weighted Euclidean distance.
    Isotropic,
}

impl KernelStructure {
    pub fn name(self) -> &'static str {
        match self {
            KernelStructure::TensorProduct => "tensor_product",
            KernelStructure::Isotropic => "isotropic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tensor_product" | "tensor" => Some(KernelStructure::TensorProduct),
            "isotropic" => Some(KernelStructure::Isotropic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    pub structure: KernelStructure,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        lengthscales: Vec<f64>,
        variance: f64,
        structure: KernelStructure,
    ) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one lengthscale"));
        }
        if lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("lengthscales must be positive: {lengthscales:?}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("variance must be positive, got {variance}")));
        }
        Ok(KernelSpec { family, lengthscales, variance, structure })
    }

    pub fn tensor(family: KernelFamily, lengthscales: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(family, lengthscales, variance, KernelStructure::TensorProduct)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Kernel value with input validation.
    pub fn try_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::invalid(format!(
                "kernel of dimension {} evaluated at points of dimension {} and {}",
                self.dim(),
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite kernel input"));
        }
        Ok(self.eval(x, y))
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.variance * self.correlation(x, y)
    }

    #[inline]
    pub fn correlation(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.structure {
            KernelStructure::TensorProduct => {
                let mut c = 1.0;
                for ((a, b), l) in x.iter().zip(y).zip(&self.lengthscales) {
                    c *= self.family.phi((a - b).abs() / l);
                }
                c
            }
            KernelStructure::Isotropic => self.family.phi(self.scaled_distance(x, y)),
        }
    }

    fn scaled_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Gradient of `k(x, y)` with respect to `x`. Zero at `x = y`.
    pub fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let fam = self.family;
        match self.structure {
            KernelStructure::TensorProduct => {
                let d = x.len();
                let mut phis = [0.0f64; 16];
                let mut heap;
                let phis: &mut [f64] = if d <= 16 {
                    &mut phis[..d]
                } else {
                    heap = vec![0.0; d];
                    &mut heap
                };
                for i in 0..d {
                    phis[i] = fam.phi((x[i] - y[i]).abs() / self.lengthscales[i]);
                }
                for i in 0..d {
                    let l = self.lengthscales[i];
                    let h = x[i] - y[i];
                    let mut g = fam.psi(h.abs() / l) * h / (l * l);
                    for (j, p) in phis.iter().enumerate() {
                        if j != i {
                            g *= p;
                        }
                    }
                    out[i] = self.variance * g;
                }
            }
            KernelStructure::Isotropic => {
                let s = self.variance * fam.psi(self.scaled_distance(x, y));
                for i in 0..x.len() {
                    let l = self.lengthscales[i];
                    out[i] = s * (x[i] - y[i]) / (l * l);
                }
            }
        }
    }

    /// Derivatives of the correlation with respect to each log-lengthscale.
    pub(crate) fn correlation_dlog(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let fam = self.family;
        match self.structure {
            KernelStructure::TensorProduct => {
                let d = x.len();
                let rs: Vec<f64> =
                    (0..d).map(|i| (x[i] - y[i]).abs() / self.lengthscales[i]).collect();
                let phis: Vec<f64> = rs.iter().map(|&r| fam.phi(r)).collect();
                for i in 0..d {
                    let mut g = -fam.psi(rs[i]) * rs[i] * rs[i];
                    for (j, p) in phis.iter().enumerate() {
                        if j != i {
                            g *= p;
                        }
                    }
                    out[i] = g;
                }
            }
            KernelStructure::Isotropic => {
                let p = fam.psi(self.scaled_distance(x, y));
                for i in 0..x.len() {
                    out[i] = -p * ((x[i] - y[i]) / self.lengthscales[i]).powi(2);
                }
            }
        }
    }
}
