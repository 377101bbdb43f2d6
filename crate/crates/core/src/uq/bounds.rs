//! Quantile envelopes of realization profiles and their conservative
//! enlargement.

use rayon::prelude::*;
use serde::Serialize;

use super::{ApproxProcess, RealizationSet};
use crate::error::{Error, Result};
use crate::optimize::{BoxDomain, Objective, Projection};
use crate::profiles::{write_real, bivariate_profiles, profile_curve, sup_at, Extrema, ProfileConfig, ProfileGrid};
use crate::rng::derive_seed;

/// Sample quantile by linear interpolation between order statistics at
/// position `(s - 1) q` (zero based). NaNs are ignored; NaN if nothing is
/// left.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Profile extrema of every realization and their pointwise quantiles.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub grid: ProfileGrid,
    pub beta: f64,
    /// Per realization, per node; NaN where the node failed.
    pub sup: Vec<Vec<f64>>,
    pub inf: Vec<Vec<f64>>,
    pub sup_lo: Vec<f64>,
    pub sup_hi: Vec<f64>,
    pub inf_lo: Vec<f64>,
    pub inf_hi: Vec<f64>,
    /// Failed realizations per node.
    pub failures: Vec<usize>,
    /// More than 5% of the realizations failed at the node.
    pub flagged: Vec<bool>,
}

/// Sweeps every realization over `grid` (1-d or lattice) and takes the
/// `beta` and `1 - beta` quantiles per node. Realizations run in parallel
/// when `cfg.parallel`; realization `r` uses seed `derive_seed(cfg.seed, r)`.
pub fn profile_envelope(
    proc: &ApproxProcess,
    set: &RealizationSet,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    beta: f64,
    cfg: &ProfileConfig,
) -> Result<Envelope> {
    if set.len() < 20 {
        return Err(Error::InsufficientData { needed: 20, got: set.len() });
    }
    if !(0.0..=0.5).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 0.5], got {beta}")));
    }
    let one = |r: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let real = proc.realization(&set.samples[r])?;
        let c = ProfileConfig { parallel: false, seed: derive_seed(cfg.seed, r as u64), ..cfg.clone() };
        crate::profiles::lenient_values(&real, proj, bounds, grid, &c)
    };
    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = if cfg.parallel {
        (0..set.len()).into_par_iter().map(one).collect()
    } else {
        (0..set.len()).map(one).collect()
    };
    let mut sup = Vec::with_capacity(set.len());
    let mut inf = Vec::with_capacity(set.len());
    for r in runs {
        let (a, b) = r?;
        sup.push(a);
        inf.push(b);
    }
    let nodes = grid.len();
    let col = |m: &Vec<Vec<f64>>, k: usize| -> Vec<f64> { m.iter().map(|row| row[k]).collect() };
    let mut env = Envelope {
        grid: grid.clone(),
        beta,
        sup_lo: vec![f64::NAN; nodes],
        sup_hi: vec![f64::NAN; nodes],
        inf_lo: vec![f64::NAN; nodes],
        inf_hi: vec![f64::NAN; nodes],
        failures: vec![0; nodes],
        flagged: vec![false; nodes],
        sup: Vec::new(),
        inf: Vec::new(),
    };
    for k in 0..nodes {
        if !grid.feasible[k] {
            continue;
        }
        let (cs, ci) = (col(&sup, k), col(&inf, k));
        let want_sup = cfg.extrema != Extrema::Inf;
        let want_inf = cfg.extrema != Extrema::Sup;
        env.failures[k] = (0..set.len()).filter(|&r| (want_sup && cs[r].is_nan()) || (want_inf && ci[r].is_nan())).count();
        env.flagged[k] = env.failures[k] as f64 > 0.05 * set.len() as f64;
        env.sup_lo[k] = quantile(&cs, beta);
        env.sup_hi[k] = quantile(&cs, 1.0 - beta);
        env.inf_lo[k] = quantile(&ci, beta);
        env.inf_hi[k] = quantile(&ci, 1.0 - beta);
    }
    env.sup = sup;
    env.inf = inf;
    Ok(env)
}

fn check_levels(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha < 1.0 && beta > 0.0 && alpha > 2.0 * beta) {
        return Err(Error::invalid(format!("levels need 1 > alpha > 2 beta > 0, got alpha={alpha}, beta={beta}")));
    }
    Ok(())
}

fn widen(sigma: f64, level: f64) -> f64 {
    (2.0 * sigma * sigma * (2.0 / level).ln()).sqrt()
}

/// Conservative bounds on the profile sup of the exact process:
/// `u_hi = q_hi + sqrt(2 s^2 log(2 / (alpha - beta)))` and
/// `u_lo = q_lo - sqrt(2 s^2 log(2 / (alpha - 2 beta)))`, with `s` the
/// per-node `sigma_delta` (not squared).
pub fn bound_envelope(
    q_lo: &[f64],
    q_hi: &[f64],
    sigma: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_levels(alpha, beta)?;
    if q_lo.len() != q_hi.len() || sigma.len() != q_hi.len() {
        return Err(Error::invalid("quantile and sigma vectors differ in length"));
    }
    let lo = q_lo.iter().zip(sigma).map(|(q, s)| q - widen(*s, alpha - 2.0 * beta)).collect();
    let hi = q_hi.iter().zip(sigma).map(|(q, s)| q + widen(*s, alpha - beta)).collect();
    Ok((lo, hi))
}

/// Bounds on the profile inf, from the sup bounds of `-Z`: the lower side
/// uses `alpha - beta` and the upper side `alpha - 2 beta`.
pub fn bound_envelope_inf(
    q_lo: &[f64],
    q_hi: &[f64],
    sigma: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
    let (lo, hi) = bound_envelope(&neg(q_hi), &neg(q_lo), sigma, alpha, beta)?;
    Ok((neg(&hi), neg(&lo)))
}

/// `min(1, 2 exp(-(u - mu)^2 / (2 sigma^2)))`.
pub fn borell_tis_tail(u: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(u > mu) {
        return Err(Error::Domain(format!("tail bound needs u > mu_delta, got u={u}, mu={mu}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * (-(u - mu).powi(2) / (2.0 * sigma * sigma)).exp()).min(1.0))
}

/// `K^Delta(x, x)` with its gradient.
struct DeltaVariance<'a>(&'a ApproxProcess);

impl Objective for DeltaVariance<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.delta_variance(x)
    }
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> Option<f64> {
        Some(self.0.delta_variance_with_grad(x, g))
    }
}

/// `(sigma^Delta_T)^2 = sup_T K^Delta(x, x)` over the fiber `Psi' x = eta`.
pub fn sigma_delta_sq(
    proc: &ApproxProcess,
    proj: &Projection,
    bounds: &BoxDomain,
    eta: &[f64],
    cfg: &ProfileConfig,
) -> Result<f64> {
    Ok(sup_at(&DeltaVariance(proc), proj, bounds, eta, None, cfg.seed, cfg)?.f.max(0.0))
}

/// `sup K^Delta(x, x)` over the whole box, from `n_starts` starts (center
/// first, then the candidates from `starts`).
pub fn sigma_delta_sq_box(proc: &ApproxProcess, bounds: &BoxDomain, starts: &[Vec<f64>], cfg: &ProfileConfig) -> Result<f64> {
    let obj = DeltaVariance(proc);
    let mut best = f64::NEG_INFINITY;
    let mut all = vec![bounds.center()];
    all.extend(starts.iter().cloned());
    for s in all.iter().take(cfg.starts_for(1).max(1)) {
        let r = crate::optimize::lbfgsb_maximize(&obj, bounds, s, &cfg.lbfgsb)?;
        best = best.max(r.f);
    }
    Ok(best.max(0.0))
}

/// `(sigma^Delta_T)^2` at every node of a 1-d grid or lattice (NaN where
/// masked), with the maximizers.
pub fn sigma_delta_sq_curve(
    proc: &ApproxProcess,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = ProfileConfig { extrema: Extrema::Sup, ..cfg.clone() };
    let obj = DeltaVariance(proc);
    let (sup, argmax) = if grid.p() == 1 {
        let r = profile_curve(&obj, proj, bounds, grid, &c)?;
        (r.sup, r.argmax)
    } else {
        let r = bivariate_profiles(&obj, proj, bounds, grid, &c)?;
        (r.sup, r.argmax)
    };
    Ok((sup.into_iter().map(|v| if v.is_nan() { v } else { v.max(0.0) }).collect(), argmax))
}

/// Trapezoidal rule on increasing abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// `integral over E_Psi of (sigma^Delta_T)^2 d eta` on a 1-d grid.
pub fn integrated_delta_variance(
    proc: &ApproxProcess,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    cfg: &ProfileConfig,
) -> Result<f64> {
    if grid.p() != 1 {
        return Err(Error::invalid("integrated delta variance is defined on 1-d grids"));
    }
    let (s2, _) = sigma_delta_sq_curve(proc, proj, bounds, grid, cfg)?;
    Ok(trapezoid(&grid.scalars(), &s2))
}

/// Quantile envelope, profile of the posterior mean, and conservative
/// bounds for both profile extrema.
#[derive(Clone, Debug, Serialize)]
pub struct BoundEnvelope {
    #[serde(skip)]
    pub grid: ProfileGrid,
    pub alpha: f64,
    pub beta: f64,
    pub s: usize,
    pub pilots: usize,
    pub mean_sup: Vec<f64>,
    pub mean_inf: Vec<f64>,
    pub sup_q_lo: Vec<f64>,
    pub sup_q_hi: Vec<f64>,
    pub sup_u_lo: Vec<f64>,
    pub sup_u_hi: Vec<f64>,
    pub inf_q_lo: Vec<f64>,
    pub inf_q_hi: Vec<f64>,
    pub inf_u_lo: Vec<f64>,
    pub inf_u_hi: Vec<f64>,
    /// `sigma^Delta_T` (not squared) per node.
    pub sigma_delta: Vec<f64>,
    /// `|mu^Delta|` at the maximizer of `K^Delta` per node.
    pub mu_delta: Vec<f64>,
    pub failures: Vec<usize>,
    pub flagged: Vec<bool>,
}

impl BoundEnvelope {
    /// Columns `eta.., mean_sup, mean_inf, sup_q_lo, sup_q_hi, sup_u_lo,
    /// sup_u_hi, inf_q_lo, inf_q_hi, inf_u_lo, inf_u_hi, sigma_delta,
    /// mu_delta, failures`; masked lattice nodes are omitted.
    pub fn to_csv(&self) -> String {
        let p = self.grid.p();
        let mut cols: Vec<String> =
            (1..=p).map(|k| if p == 1 { "eta".to_string() } else { format!("eta{k}") }).collect();
        for c in [
            "mean_sup", "mean_inf", "sup_q_lo", "sup_q_hi", "sup_u_lo", "sup_u_hi", "inf_q_lo", "inf_q_hi", "inf_u_lo",
            "inf_u_hi", "sigma_delta", "mu_delta", "failures",
        ] {
            cols.push(c.to_string());
        }
        let mut out = cols.join(",");
        out.push('\n');
        for k in 0..self.grid.len() {
            if !self.grid.feasible[k] {
                continue;
            }
            let vals = self.grid.etas[k].iter().chain([
                &self.mean_sup[k],
                &self.mean_inf[k],
                &self.sup_q_lo[k],
                &self.sup_q_hi[k],
                &self.sup_u_lo[k],
                &self.sup_u_hi[k],
                &self.inf_q_lo[k],
                &self.inf_q_hi[k],
                &self.inf_u_lo[k],
                &self.inf_u_hi[k],
                &self.sigma_delta[k],
                &self.mu_delta[k],
            ]);
            for v in vals {
                write_real(&mut out, *v);
                out.push(',');
            }
            out.push_str(&self.failures[k].to_string());
            out.push('\n');
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
pub fn uq_profiles(
    proc: &ApproxProcess,
    set: &RealizationSet,
    proj: &Projection,
    bounds: &BoxDomain,
    grid: &ProfileGrid,
    alpha: f64,
    beta: f64,
    cfg: &ProfileConfig,
) -> Result<BoundEnvelope> {
    check_levels(alpha, beta)?;
    let env = profile_envelope(proc, set, proj, bounds, grid, beta, cfg)?;
    let model = proc.model();
    let (mean_sup, mean_inf) = if grid.p() == 1 {
        let c = profile_curve(model, proj, bounds, grid, cfg)?;
        (c.sup, c.inf)
    } else {
        let m = bivariate_profiles(model, proj, bounds, grid, cfg)?;
        (m.sup, m.inf)
    };
    let (s2, argmax) = sigma_delta_sq_curve(proc, proj, bounds, grid, cfg)?;
    let sigma: Vec<f64> = s2.iter().map(|v| v.sqrt()).collect();
    let mu_delta = argmax.iter().map(|x| if x[0].is_nan() { f64::NAN } else { proc.delta_mean(x).abs() }).collect();
    let (sup_u_lo, sup_u_hi) = bound_envelope(&env.sup_lo, &env.sup_hi, &sigma, alpha, beta)?;
    let (inf_u_lo, inf_u_hi) = bound_envelope_inf(&env.inf_lo, &env.inf_hi, &sigma, alpha, beta)?;
    Ok(BoundEnvelope {
        grid: grid.clone(),
        alpha,
        beta,
        s: set.len(),
        pilots: proc.n_pilots(),
        mean_sup,
        mean_inf,
        sup_q_lo: env.sup_lo,
        sup_q_hi: env.sup_hi,
        sup_u_lo,
        sup_u_hi,
        inf_q_lo: env.inf_lo,
        inf_q_hi: env.inf_hi,
        inf_u_lo,
        inf_u_hi,
        sigma_delta: sigma,
        mu_delta,
        failures: env.failures,
        flagged: env.flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0, f64::NAN];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert!((quantile(&v, 0.1) - 1.3).abs() < 1e-15);
        assert!(quantile(&[f64::NAN], 0.5).is_nan());
    }

    #[test]
    fn bound_formula() {
        let (lo, hi) = bound_envelope(&[0.0], &[0.0], &[1.0], 0.1, 0.025).unwrap();
        assert!((hi[0] - (2.0 * (2.0f64 / 0.075).ln()).sqrt()).abs() < 1e-14);
        assert!((hi[0] - 2.5626).abs() < 1e-4);
        assert!((lo[0] + (2.0 * (2.0f64 / 0.05).ln()).sqrt()).abs() < 1e-14);
        let (lo, hi) = bound_envelope(&[1.0], &[2.0], &[0.0], 0.1, 0.025).unwrap();
        assert_eq!((lo[0], hi[0]), (1.0, 2.0));
        assert!(bound_envelope(&[0.0], &[0.0], &[1.0], 0.05, 0.025).is_err());
    }

    #[test]
    fn inf_bounds_mirror_sup_bounds() {
        let (lo, hi) = bound_envelope_inf(&[-1.0], &[0.5], &[0.3], 0.2, 0.05).unwrap();
        assert!((lo[0] - (-1.0 - widen(0.3, 0.15))).abs() < 1e-15);
        assert!((hi[0] - (0.5 + widen(0.3, 0.1))).abs() < 1e-15);
    }

    #[test]
    fn tail_bound() {
        let s = 0.7;
        assert!((borell_tis_tail(s * (2.0 * 2f64.ln()).sqrt(), 0.0, s).unwrap() - 1.0).abs() < 1e-12);
        assert!(borell_tis_tail(50.0, 0.0, 1.0).unwrap() < 1e-300);
        assert!(matches!(borell_tis_tail(0.1, 0.2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn trapezoid_of_constant() {
        let x = [-0.5, 0.0, 0.3, 1.2];
        assert!((trapezoid(&x, &[2.0; 4]) - 3.4).abs() < 1e-14);
    }
}
