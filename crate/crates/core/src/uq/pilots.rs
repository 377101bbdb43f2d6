//! Greedy pilot point selection.

use nalgebra::DMatrix;

use crate::design::Sobol;
use crate::error::{Error, Result};
use crate::gp::GpModel;

pub const POOL_SIZE: usize = 4096;

/// Scrambled Sobol candidates in the unit cube.
pub fn candidate_pool(d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(Sobol::scrambled(d, seed)?.take_points(POOL_SIZE))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PilotSelection {
    pub points: Vec<Vec<f64>>,
    /// Posterior variance of each point when it was chosen.
    pub variances: Vec<f64>,
    /// True when selection stopped early because every remaining
    /// candidate was already (numerically) known.
    pub halted: bool,
}

/// Picks `l` pool points one at a time, each maximizing the posterior
/// variance given the design and the points already chosen (ties go to the
/// lowest pool index). This is a pivoted Cholesky factorization of the
/// posterior covariance on the pool, so a shorter run is a prefix of a
/// longer one. Stops early when the best variance falls below
/// `1e-8` times the prior variance.
pub fn select_pilot_points(model: &GpModel, l: usize, pool: &[Vec<f64>]) -> Result<PilotSelection> {
    if l == 0 {
        return Err(Error::invalid("at least one pilot point is required"));
    }
    if pool.len() < l {
        return Err(Error::InsufficientData { needed: l, got: pool.len() });
    }
    let d = model.dim();
    if pool.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("candidate dimension does not match the model"));
    }
    let sys = model.system();
    let kern = model.kernel();
    let (v, lam, mlam) = sys.features(pool);
    let np = pool.len();
    let mut var: Vec<f64> = (0..np)
        .map(|j| kern.variance - v.column(j).norm_squared() + lam.column(j).dot(&mlam.column(j)))
        .collect();
    let floor = 1e-8 * kern.variance;
    let mut taken = vec![false; np];
    let mut factor = DMatrix::<f64>::zeros(l, np);
    let mut out = PilotSelection { points: Vec::with_capacity(l), variances: Vec::with_capacity(l), halted: false };

    for step in 0..l {
        let mut best = None;
        for j in 0..np {
            if !taken[j] && best.is_none_or(|b: usize| var[j] > var[b]) {
                best = Some(j);
            }
        }
        let Some(b) = best else {
            return Err(Error::InsufficientData { needed: l, got: step });
        };
        if !(var[b] > floor) {
            log::warn!("pilot selection stopped after {step} points: remaining variance {:.3e}", var[b]);
            out.halted = true;
            break;
        }
        taken[b] = true;
        out.points.push(pool[b].clone());
        out.variances.push(var[b]);
        let piv = var[b].sqrt();
        let vb = v.column(b);
        let lb = mlam.column(b);
        for j in 0..np {
            if taken[j] {
                continue;
            }
            let mut c = kern.eval(&pool[j], &pool[b]) - v.column(j).dot(&vb) + lam.column(j).dot(&lb);
            for k in 0..step {
                c -= factor[(k, j)] * factor[(k, b)];
            }
            let f = c / piv;
            factor[(step, j)] = f;
            var[j] -= f * f;
        }
        factor[(step, b)] = piv;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{KernelFamily, KernelSpec, TrendBasis};

    fn model_1d() -> GpModel {
        let x = vec![vec![0.1], vec![0.35], vec![0.8]];
        let y = vec![0.2, -0.4, 1.0];
        let k = KernelSpec::tensor(KernelFamily::Matern52, vec![0.2], 1.0).unwrap();
        GpModel::condition(x, y, k, TrendBasis::constant()).unwrap()
    }

    #[test]
    fn first_pick_maximizes_variance() {
        let m = model_1d();
        let pool: Vec<Vec<f64>> = (0..201).map(|i| vec![i as f64 / 200.0]).collect();
        let s = select_pilot_points(&m, 1, &pool).unwrap();
        let best = pool.iter().map(|p| m.posterior_var(p)).fold(0.0, f64::max);
        assert!((s.variances[0] - best).abs() < 1e-12);
        assert_eq!(m.posterior_var(&s.points[0]), s.variances[0]);
    }

    #[test]
    fn selection_is_nested_and_conditional() {
        let m = model_1d();
        let pool: Vec<Vec<f64>> = (0..101).map(|i| vec![0.001 + 0.99 * i as f64 / 100.0]).collect();
        let a = select_pilot_points(&m, 3, &pool).unwrap();
        let b = select_pilot_points(&m, 6, &pool).unwrap();
        assert_eq!(a.points[..], b.points[..3]);
        // The variance recorded at step 2 is the variance given design + first pick.
        let mut x = m.design().to_vec();
        x.push(b.points[0].clone());
        let mut y = m.observations().to_vec();
        y.push(0.0);
        let m2 = GpModel::condition(x, y, m.kernel().clone(), m.trend().clone()).unwrap();
        assert!((m2.posterior_var(&b.points[1]) - b.variances[1]).abs() < 1e-9);
    }

    #[test]
    fn halts_when_pool_is_exhausted() {
        let m = model_1d();
        let pool = vec![vec![0.1], vec![0.35], vec![0.5]];
        let s = select_pilot_points(&m, 3, &pool).unwrap();
        assert!(s.halted);
        assert_eq!(s.points, vec![vec![0.5]]);
    }
}
