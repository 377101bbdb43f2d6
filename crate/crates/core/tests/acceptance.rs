//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion outside `KNOWN_FAILURES` fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use profex::design::{maximin_lhs, Sobol};
use profex::gp::{FitConfig, GpModel, KernelFamily, KernelSpec, TrendBasis};
use profex::linalg::cholesky_jittered;
use profex::optimize::{BoxDomain, Projection};
use profex::pipeline::{run, Mode, RunConfig, Transform};
use profex::profiles::{
    approximate_curve, bivariate_profiles, coordinate_profiles, excluded_measure, excursion_intervals,
    excursion_intervals_from, oblique_profiles, profile_curve, Interval, ProfileConfig, ProfileGrid,
};
use profex::rng::Stream;
use profex::testfns::{AnalyticFn2d, AnalyticFn3d};
use profex::uq::{
    borell_tis_tail, candidate_pool, integrated_delta_variance, select_pilot_points, simulate_realizations,
    uq_profiles, ApproxProcess,
};

/// Criteria expected to fail; see the project notes.
const KNOWN_FAILURES: &[u32] = &[1];

// Tolerances.
const TOL_COORD_ENDPOINT: f64 = 0.01;
const TOL_OBLIQUE_ENDPOINT: f64 = 0.02;
const TOL_OBLIQUE_AREA: f64 = 0.03;
const TOL_VOLUME: f64 = 0.005;
const BAND_COORD_INF: f64 = 0.01;
const BAND_COORD_SUP: f64 = 0.06;
const BAND_OBLIQUE_INF: f64 = 0.01;
const BAND_OBLIQUE_SUP: f64 = 0.08;
const Q2_DENSE_MIN: f64 = 0.97;
const Q2_SPARSE_BAND: (f64, f64) = (0.6, 0.95);
const TOL_INTERP_REL: f64 = 1e-6;
const TOL_UNBIASED: f64 = 1e-8;
const TOL_GRAD_REL: f64 = 1e-4;
const TOL_NESTED: f64 = 1e-8;
const TOL_CUT: f64 = 0.02;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn serial() -> ProfileConfig {
    ProfileConfig { parallel: false, ..ProfileConfig::default() }
}

fn f2() -> AnalyticFn2d {
    AnalyticFn2d::excursion_example()
}

fn fit_2d(n: usize, seed: u64) -> GpModel {
    let f = f2();
    let x = maximin_lhs(n, 2, seed, 20);
    let y = x.iter().map(|p| f.eval(p)).collect();
    let cfg = FitConfig { seed, ..FitConfig::default() };
    GpModel::fit(x, y, KernelFamily::Matern52, TrendBasis::constant(), &cfg).unwrap()
}

fn fmt_intervals(iv: &[Interval]) -> String {
    iv.iter().map(|i| format!("[{:.4}, {:.4}]", i.lo, i.hi)).collect::<Vec<_>>().join(" U ")
}

fn endpoints_match(got: &[Interval], want: &[(f64, f64)], tol: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g.lo - w.0).abs() <= tol && (g.hi - w.1).abs() <= tol)
}

/// First/last grid nodes of each run of nodes where `sup < tau`.
fn node_runs(eta: &[f64], sup: &[f64], tau: f64) -> String {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for j in 0..=eta.len() {
        let inside = j < eta.len() && sup[j] < tau;
        match (inside, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                runs.push(format!("[{:.2}, {:.2}]", eta[s], eta[j - 1]));
                start = None;
            }
            _ => {}
        }
    }
    runs.join(" U ")
}

fn c1_coordinate_intervals() -> Outcome {
    let f = f2();
    let b = BoxDomain::unit(2);
    let grid = ProfileGrid::line(0.0, 1.0, 100).unwrap();
    let t0 = Instant::now();
    let c1 = coordinate_profiles(&f, 0, &b, &grid, &serial()).unwrap();
    let c2 = coordinate_profiles(&f, 1, &b, &grid, &serial()).unwrap();
    let elapsed = t0.elapsed();
    let i1 = excursion_intervals(&c1, 0.0).unwrap().non_excursion;
    let i2 = excursion_intervals(&c2, 0.0).unwrap().non_excursion;
    let ok1 = endpoints_match(&i1, &[(0.0, 0.13)], TOL_COORD_ENDPOINT);
    let ok2 = endpoints_match(&i2, &[(0.0, 0.25), (0.70, 0.80)], TOL_COORD_ENDPOINT);
    let fast = elapsed <= Duration::from_secs(10);
    outcome(
        ok1 && ok2 && fast,
        format!(
            "x1: {} (want [0, 0.13]); x2: {} (want [0, 0.25] U [0.70, 0.80]); tol {TOL_COORD_ENDPOINT}; \
             {:.2?}; grid-node runs: x1 {}, x2 {}",
            fmt_intervals(&i1),
            fmt_intervals(&i2),
            elapsed,
            node_runs(&c1.eta, &c1.sup, 0.0),
            node_runs(&c2.eta, &c2.sup, 0.0),
        ),
    )
}

fn c2_oblique_intervals() -> Outcome {
    let f = f2();
    let b = BoxDomain::unit(2);
    let mut ok = true;
    let mut detail = Vec::new();
    let cases = [
        (f.v1(), vec![(0.0, 0.52), (1.22, 1.37)], 0.33),
        (f.v2(), vec![(-0.5, -0.1), (0.11, 0.54), (0.71, 0.87)], 0.68),
    ];
    for (k, (v, want, area)) in cases.iter().enumerate() {
        let p = Projection::oblique(v).unwrap();
        let grid = ProfileGrid::for_projection(&p, &b, 100).unwrap();
        let c = oblique_profiles(&f, &p, &b, &grid, &serial()).unwrap();
        let ne = excursion_intervals(&c, 0.0).unwrap().non_excursion;
        let m = excluded_measure(&p, &b, &ne).unwrap();
        let good = endpoints_match(&ne, want, TOL_OBLIQUE_ENDPOINT) && (m - area).abs() <= TOL_OBLIQUE_AREA;
        ok &= good;
        detail.push(format!("v{}: {} area {:.3} (want {area})", k + 1, fmt_intervals(&ne), m));
    }
    outcome(ok, detail.join("; "))
}

fn c3_excursion_volume() -> Outcome {
    let f = f2();
    let n = 1000;
    let mut hit = 0usize;
    for i in 0..n {
        for j in 0..n {
            if f.eval(&[(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64]) >= 0.0 {
                hit += 1;
            }
        }
    }
    let v = hit as f64 / (n * n) as f64;
    outcome((v - 0.127).abs() <= TOL_VOLUME, format!("volume {v:.4} (want 0.127 +- {TOL_VOLUME})"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c4_spline_approximation() -> Outcome {
    let f = f2();
    let b = BoxDomain::unit(2);
    let cfg = serial();
    let mut ok = true;
    let mut detail = Vec::new();
    let projs = [
        ("x1", Projection::coordinate(2, 0).unwrap(), BAND_COORD_INF, BAND_COORD_SUP),
        ("x2", Projection::coordinate(2, 1).unwrap(), BAND_COORD_INF, BAND_COORD_SUP),
        ("v1", Projection::oblique(&f.v1()).unwrap(), BAND_OBLIQUE_INF, BAND_OBLIQUE_SUP),
        ("v2", Projection::oblique(&f.v2()).unwrap(), BAND_OBLIQUE_INF, BAND_OBLIQUE_SUP),
    ];
    for (name, p, band_inf, band_sup) in &projs {
        let grid = ProfileGrid::for_projection(p, &b, 100).unwrap();
        let exact = profile_curve(&f, p, &b, &grid, &cfg).unwrap();
        let approx = approximate_curve(&f, p, &b, &grid, 15, false, &cfg).unwrap().curve;
        let rel = |a: &[f64], e: &[f64]| median(a.iter().zip(e).map(|(a, e)| ((a - e) / e).abs()).collect());
        let (es, ei) = (rel(&approx.sup, &exact.sup), rel(&approx.inf, &exact.inf));
        ok &= es <= *band_sup && ei <= *band_inf;
        detail.push(format!("{name} sup {:.2}% inf {:.2}%", 100.0 * es, 100.0 * ei));
    }
    outcome(ok, format!("median relative error: {}", detail.join(", ")))
}

fn c5_gp_quality() -> Outcome {
    let f = f2();
    let test = Sobol::scrambled(2, 0x7465_7374).unwrap().take_points(2000);
    let truth: Vec<f64> = test.iter().map(|p| f.eval(p)).collect();
    let q2 = |n: usize, seed: u64| fit_2d(n, seed).q2(&test, &truth).unwrap();
    let dense: Vec<f64> = (0..10).map(|s| q2(90, s)).collect();
    let sparse: Vec<f64> = (0..10).map(|s| q2(20, 100 + s)).collect();
    let dmin = dense.iter().copied().fold(f64::INFINITY, f64::min);
    let smean = sparse.iter().sum::<f64>() / sparse.len() as f64;
    let (slo, shi) = sparse.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    outcome(
        dmin >= Q2_DENSE_MIN && (Q2_SPARSE_BAND.0..=Q2_SPARSE_BAND.1).contains(&smean),
        format!(
            "n=90: min Q2 {dmin:.4} over 10 designs (want >= {Q2_DENSE_MIN}); \
             n=20: mean Q2 {smean:.3}, range [{slo:.3}, {shi:.3}] (want mean in [0.6, 0.95])"
        ),
    )
}

fn toy_process(pilots: usize) -> (GpModel, ApproxProcess) {
    let m = fit_2d(20, 1);
    let pool = candidate_pool(2, 11).unwrap();
    let g = select_pilot_points(&m, pilots, &pool).unwrap().points;
    let proc = ApproxProcess::new(&m, g).unwrap();
    (m, proc)
}

fn c6_process_exactness() -> Outcome {
    let (m, proc) = toy_process(50);
    let set = simulate_realizations(&proc, 100, 5);
    let mut worst: f64 = 0.0;
    for z in &set.samples {
        let r = proc.realization(z).unwrap();
        for (x, y) in m.design().iter().zip(m.observations()) {
            worst = worst.max((r.eval(x) - y).abs() / y.abs().max(1.0));
        }
        for (g, v) in proc.pilots().iter().zip(z) {
            worst = worst.max((r.eval(g) - v).abs() / v.abs().max(1.0));
        }
    }
    let mean = proc.realization(proc.pilot_mean().as_slice()).unwrap();
    let mut rng = Stream::new(17);
    let mut bias: f64 = 0.0;
    for _ in 0..200 {
        let x = [rng.uniform(), rng.uniform()];
        bias = bias.max((mean.eval(&x) - m.posterior_mean(&x)).abs()).max(proc.delta_mean(&x).abs());
    }
    outcome(
        worst <= TOL_INTERP_REL && bias <= TOL_UNBIASED,
        format!("max interpolation error {worst:.2e} (tol {TOL_INTERP_REL:e}); max |E Z~ - mu_n| {bias:.2e} (tol {TOL_UNBIASED:e})"),
    )
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(g: &[f64], fd: &[f64]) -> f64 {
    let num = g.iter().zip(fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(1e-8)
}

fn c7_gradients() -> Outcome {
    let (m, proc) = toy_process(30);
    let set = simulate_realizations(&proc, 1, 9);
    let r = proc.realization(&set.samples[0]).unwrap();
    let k = KernelSpec::tensor(KernelFamily::Matern52, vec![0.3, 0.2, 0.5], 1.7).unwrap();
    let mut rng = Stream::new(23);
    let (mut ek, mut em, mut er) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let x3: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
        let y3: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
        let mut g = vec![0.0; 3];
        k.grad_x(&x3, &y3, &mut g);
        ek = ek.max(rel_err(&g, &central_difference(&|x| k.eval(x, &y3), &x3)));

        let x = [0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()];
        em = em.max(rel_err(&m.posterior_mean_grad(&x), &central_difference(&|x| m.posterior_mean(x), &x)));
        let mut gr = vec![0.0; 2];
        r.grad(&x, &mut gr);
        er = er.max(rel_err(&gr, &central_difference(&|x| r.eval(x), &x)));
    }
    let worst = ek.max(em).max(er);
    outcome(
        worst <= TOL_GRAD_REL,
        format!("max relative error: kernel {ek:.1e}, posterior mean {em:.1e}, realization {er:.1e} (tol {TOL_GRAD_REL:e})"),
    )
}

/// Joint draws from `N(mean, cov)`, one per row of the result.
fn joint_draws(mean: &DVector<f64>, cov: DMatrix<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let scale = cov.diagonal().max();
    let (ch, _) = cholesky_jittered(cov, scale).unwrap();
    let l = ch.l();
    let mut rng = Stream::new(seed);
    (0..count)
        .map(|_| {
            let e = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.normal()));
            mean + &l * e
        })
        .collect()
}

fn c8_borell_tis() -> Outcome {
    let t0 = Instant::now();
    let k = KernelSpec::tensor(KernelFamily::Matern52, vec![0.15], 1.0).unwrap();
    let x: Vec<Vec<f64>> = [0.05, 0.3, 0.55, 0.8].iter().map(|v| vec![*v]).collect();
    let y = vec![0.4, -0.6, 0.1, 0.9];
    let m = GpModel::condition(x, y.clone(), k, TrendBasis::constant()).unwrap();
    let pool = candidate_pool(1, 3).unwrap();
    let proc = ApproxProcess::new(&m, select_pilot_points(&m, 10, &pool).unwrap().points).unwrap();
    let grid: Vec<Vec<f64>> = (0..300).map(|i| vec![i as f64 / 299.0]).collect();
    let mut pts = grid.clone();
    pts.extend(proc.pilots().iter().cloned());
    let mean = DVector::from_iterator(pts.len(), pts.iter().map(|p| m.posterior_mean(p)));
    let cov = m.system().covariance_matrix(&pts);
    let draws = joint_draws(&mean, cov, 5000, 41);
    let n = m.n();
    let lam = DMatrix::from_fn(grid.len(), n + proc.n_pilots(), |i, j| proc.lambda(&grid[i])[j]);
    let sigma2 = grid.iter().map(|g| proc.delta_variance(g)).fold(0.0, f64::max);
    let mu = grid.iter().map(|g| proc.delta_mean(g).abs()).fold(0.0, f64::max);
    let sigma = sigma2.sqrt();
    let gaps: Vec<f64> = draws
        .iter()
        .map(|z| {
            let stacked = DVector::from_iterator(n + proc.n_pilots(), y.iter().copied().chain(z.rows(300, proc.n_pilots()).iter().copied()));
            let approx = &lam * stacked;
            let sup_z = z.rows(0, 300).max();
            (sup_z - approx.max()).abs()
        })
        .collect();
    let mut worst_margin = f64::INFINITY;
    let mut ok = true;
    for j in 1..=20 {
        let u = mu + sigma * 4.0 * j as f64 / 20.0;
        let freq = gaps.iter().filter(|g| **g > u).count() as f64 / gaps.len() as f64;
        let bound = borell_tis_tail(u, mu, sigma).unwrap();
        ok &= freq <= bound;
        worst_margin = worst_margin.min(bound - freq);
    }
    let elapsed = t0.elapsed();
    ok &= elapsed <= Duration::from_secs(60);
    outcome(
        ok,
        format!("sigma_delta {sigma:.3e}, mu_delta {mu:.1e}; min (bound - frequency) over 20 u values {worst_margin:.4}; {elapsed:.2?}"),
    )
}

fn c9_coverage() -> Outcome {
    let t0 = Instant::now();
    let (alpha, beta) = (0.1, 0.025);
    let (m, proc) = {
        let m = fit_2d(20, 1);
        let pool = candidate_pool(2, 11).unwrap();
        let g = select_pilot_points(&m, 50, &pool).unwrap().points;
        let p = ApproxProcess::new(&m, g).unwrap();
        (m, p)
    };
    let set = simulate_realizations(&proc, 200, 77);
    let b = BoxDomain::unit(2);
    let n = 60;
    let axis: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let grid = ProfileGrid::from_values(&axis).unwrap();
    let cfg = ProfileConfig { seed: 3, ..ProfileConfig::default() };
    let env: Vec<_> = (0..2)
        .map(|i| uq_profiles(&proc, &set, &Projection::coordinate(2, i).unwrap(), &b, &grid, alpha, beta, &cfg).unwrap())
        .collect();
    let pts: Vec<Vec<f64>> = (0..n * n).map(|k| vec![axis[k / n], axis[k % n]]).collect();
    let mean = DVector::from_iterator(pts.len(), pts.iter().map(|p| m.posterior_mean(p)));
    let paths = joint_draws(&mean, m.system().covariance_matrix(&pts), 1000, 99);
    let target = (1.0 - 2.0 * alpha) - 3.0 * ((1.0 - 2.0 * alpha) * 2.0 * alpha / 1000.0f64).sqrt();
    let mut good = 0;
    let mut worst: f64 = 1.0;
    for (i, e) in env.iter().enumerate() {
        for j in 0..n {
            let inside = paths
                .iter()
                .filter(|z| {
                    let sup = (0..n).map(|k| if i == 0 { z[j * n + k] } else { z[k * n + j] }).fold(f64::NEG_INFINITY, f64::max);
                    sup >= e.sup_u_lo[j] && sup <= e.sup_u_hi[j]
                })
                .count() as f64
                / paths.len() as f64;
            worst = worst.min(inside);
            if inside >= target {
                good += 1;
            }
        }
    }
    let frac = good as f64 / (2 * n) as f64;
    let elapsed = t0.elapsed();
    outcome(
        frac >= 0.95 && elapsed <= Duration::from_secs(600),
        format!("{:.1}% of nodes with coverage >= {target:.3} (want 95%); worst node {worst:.3}; {elapsed:.2?}", 100.0 * frac),
    )
}

fn c10_tightness() -> Outcome {
    let m = fit_2d(90, 4);
    let f = f2();
    let pool = candidate_pool(2, 21).unwrap();
    let all = select_pilot_points(&m, 80, &pool).unwrap().points;
    let b = BoxDomain::unit(2);
    let cfg = ProfileConfig { seed: 8, ..ProfileConfig::default() };
    let projs = [
        ("x1", Projection::coordinate(2, 0).unwrap()),
        ("x2", Projection::coordinate(2, 1).unwrap()),
        ("v1", Projection::oblique(&f.v1()).unwrap()),
        ("v2", Projection::oblique(&f.v2()).unwrap()),
    ];
    let ells = [10, 20, 40, 80];
    let mut table = vec![Vec::new(); projs.len()];
    for &l in &ells {
        let proc = ApproxProcess::new(&m, all[..l].to_vec()).unwrap();
        for (k, (_, p)) in projs.iter().enumerate() {
            let grid = ProfileGrid::for_projection(p, &b, 100).unwrap();
            table[k].push(integrated_delta_variance(&proc, p, &b, &grid, &cfg).unwrap());
        }
    }
    let ok = table.iter().all(|v| v.windows(2).all(|w| w[1] <= w[0] + TOL_NESTED));
    let rows: Vec<String> = projs
        .iter()
        .zip(&table)
        .map(|((n, _), v)| format!("{n} {}", v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" > ")))
        .collect();
    outcome(ok, format!("I(sigma^2) at l = 10, 20, 40, 80: {}", rows.join("; ")))
}

fn c11_bivariate_cut() -> Outcome {
    let f = AnalyticFn3d::default();
    let b = BoxDomain::unit(3);
    let p = Projection::coordinate_pair(3, 0, 1).unwrap();
    let n = 101;
    let axis: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    // Single lattice row at x2 = 0.2 sampled finely in x1.
    let row = ProfileGrid { etas: axis.iter().map(|a| vec![*a, 0.2]).collect(), resolution: vec![1, n], feasible: vec![true; n] };
    let map = bivariate_profiles(&f, &p, &b, &row, &serial()).unwrap();
    let part = excursion_intervals_from(&axis, &map.sup, &map.inf, 0.0).unwrap();
    let cut_ok = endpoints_match(&part.non_excursion, &[(0.115, 1.0)], TOL_CUT);

    let lattice = ProfileGrid::lattice(&p, &b, 30, 30).unwrap();
    let full = bivariate_profiles(&f, &p, &b, &lattice, &serial()).unwrap();
    let region = full.sup.iter().any(|v| *v < 0.0);

    let grid = ProfileGrid::line(0.0, 1.0, 100).unwrap();
    let mut min_sup = f64::INFINITY;
    let mut max_inf = f64::NEG_INFINITY;
    for i in 0..3 {
        let c = coordinate_profiles(&f, i, &b, &grid, &serial()).unwrap();
        min_sup = c.sup.iter().copied().fold(min_sup, f64::min);
        max_inf = c.inf.iter().copied().fold(max_inf, f64::max);
    }
    outcome(
        cut_ok && region && min_sup > 0.0 && max_inf < 0.0,
        format!(
            "cut x2=0.2 non-excursion {} (want [0.115, 1] +- {TOL_CUT}); region with P^sup < 0: {region}; \
             coordinate profiles: min sup {min_sup:.3} > 0, max inf {max_inf:.3} < 0",
            fmt_intervals(&part.non_excursion)
        ),
    )
}

fn data_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "report.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = |out: &str, threads: usize| {
        let mut c = RunConfig { mode: Mode::Pipeline, seed: 12, threads, out: tmp.path().join(out), ..Default::default() };
        c.input.function = Some("analytic3d".into());
        c.input.n = 30;
        c.profiles.grid = 20;
        c.profiles.lattice = 5;
        c.uq.pilots = 10;
        c.uq.sims = 20;
        c
    };
    run(&config("a", 1)).unwrap();
    run(&config("a", 1)).unwrap();
    let first = data_files(&tmp.path().join("a"));
    run(&config("b", 1)).unwrap();
    let again = data_files(&tmp.path().join("b"));
    run(&config("c", 4)).unwrap();
    let threaded = data_files(&tmp.path().join("c"));
    let same = first == again && first == threaded;
    outcome(same, format!("{} data files; rerun identical: {}; 1 vs 4 threads identical: {}", first.len(), first == again, first == threaded))
}

fn c13_substitute_smoke() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig { mode: Mode::Fit, seed: 13, out: tmp.path().to_path_buf(), transform: Transform::Sqrt, ..Default::default() };
    c.input.function = Some("synthetic5d".into());
    c.input.n = 200;
    c.fit.kernel = "matern32".into();
    c.fit.trend = "linear".into();
    let out = run(&c).unwrap();
    let q2 = out.summary["fit"]["q2_holdout"].as_f64().unwrap_or(f64::NAN);
    let q2_loo = out.summary["fit"]["q2_loo"].as_f64().unwrap_or(f64::NAN);
    outcome(
        q2 >= 0.9 && tmp.path().join("model.txt").exists(),
        format!(
            "substitute case: synthetic 5-d, 200 points, sqrt output: \
             hold-out Q2 {q2:.4}, LOO Q2 {q2_loo:.4} (want >= 0.9)"
        ),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "coordinate profile intervals", c1_coordinate_intervals),
        (2, "oblique profile intervals", c2_oblique_intervals),
        (3, "excursion volume", c3_excursion_volume),
        (4, "spline approximation", c4_spline_approximation),
        (5, "GP quality", c5_gp_quality),
        (6, "approximating process exactness", c6_process_exactness),
        (7, "gradients", c7_gradients),
        (8, "Borell-TIS tail bound", c8_borell_tis),
        (9, "bound coverage", c9_coverage),
        (10, "tightness monotonicity", c10_tightness),
        (11, "3-d bivariate cut", c11_bivariate_cut),
        (12, "determinism", c12_determinism),
        (13, "pipeline smoke", c13_substitute_smoke),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if res.pass { "PASS" } else { "FAIL" };
        let note = if !res.pass && KNOWN_FAILURES.contains(&id) { " (known)" } else { "" };
        println!("criterion {id:>2} {tag}{note} {name} [{:.1?}]: {}", t0.elapsed(), res.detail);
        if !res.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
