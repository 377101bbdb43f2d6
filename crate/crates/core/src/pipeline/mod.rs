//! Config-driven workflow: fit an emulator, sweep 1-d profiles with their
//! uncertainty envelopes, then 2-d profile maps. Every data artifact is a
//! pure function of the config; only `report.json` carries a timestamp.

mod config;
mod doe;
mod projection;

pub use config::{FitSection, InputConfig, Mode, ProfileSection, RunConfig, Transform, UqSection};
pub use doe::{parse_doe, write_doe, Doe, Scaling};
pub use projection::ProjectionSpec;

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Map, Value};

use crate::design::{maximin_lhs, Sobol};
use crate::error::{Error, Result};
use crate::gp::{read_model, write_model, FitConfig, GpModel, KernelFamily, TrendBasis};
use crate::optimize::{BoxDomain, Negated, Objective, Projection};
use crate::profiles::{
    approximate_curve, approximate_map, bivariate_profiles, curve_csv, curve_json, excluded_measure,
    excursion_intervals, map_csv, map_json, profile_curve, refine_intervals, sup_at, ExcursionIntervals,
    Interval, ProfileConfig, ProfileCurve, ProfileGrid, ProfileMap, Provenance,
};
use crate::rng::derive_seed;
use crate::testfns::TestFunction;
use crate::uq::{
    candidate_pool, select_pilot_points, simulate_realizations, trapezoid, uq_profiles, ApproxProcess,
    BoundEnvelope, RealizationSet,
};

// Stream tags for `derive_seed`.
const SEED_DESIGN: u64 = 1;
const SEED_FIT: u64 = 2;
const SEED_POOL: u64 = 3;
const SEED_SIMS: u64 = 4;
const SEED_PROFILE: u64 = 0x100;
const SEED_MAP: u64 = 0x200;

/// Files written by a run (sorted) and the summary document.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Runs `cfg` on a pool of `cfg.threads` threads (0: one per core).
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| Runner::new(cfg)?.run())
}

struct Data {
    model: GpModel,
    scaling: Scaling,
}

struct Uq {
    proc: ApproxProcess,
    set: RealizationSet,
    halted: bool,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    files: Vec<PathBuf>,
    summary: Map<String, Value>,
}

fn intervals_json(iv: &[Interval]) -> Value {
    json!(iv.iter().map(|i| json!([i.lo, i.hi])).collect::<Vec<_>>())
}

fn parts_json(p: &ExcursionIntervals) -> Value {
    json!({
        "non_excursion": intervals_json(&p.non_excursion),
        "excursion": intervals_json(&p.excursion),
        "undetermined": intervals_json(&p.undetermined),
    })
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Runner { cfg, out: cfg.out.clone(), files: Vec::new(), summary: Map::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    fn profile_config(&self, tag: u64) -> ProfileConfig {
        ProfileConfig { n_starts: self.cfg.profiles.starts, seed: derive_seed(self.cfg.seed, tag), ..Default::default() }
    }

    fn run(mut self) -> Result<RunOutcome> {
        let mode = self.cfg.mode;
        self.summary.insert("mode".into(), json!(mode));
        self.summary.insert("seed".into(), json!(self.cfg.seed));
        self.summary.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        if mode == Mode::Demo {
            self.demo()?;
        } else {
            let data = self.data()?;
            let with_uq = self.cfg.uq.sims > 0 && matches!(mode, Mode::Uq | Mode::Pipeline | Mode::Bivariate);
            if self.cfg.uq.sims == 0 && matches!(mode, Mode::Uq | Mode::Pipeline) {
                info!("sims = 0: skipping the UQ stages");
            }
            let uq = if with_uq { Some(self.build_uq(&data.model)?) } else { None };
            if matches!(mode, Mode::Profile | Mode::Uq | Mode::Pipeline) {
                self.curves(&data, uq.as_ref())?;
            }
            if matches!(mode, Mode::Bivariate | Mode::Pipeline) {
                self.maps(&data.model, data.model.dim(), Some(data.model.observations()), uq.as_ref())?;
            }
        }
        let summary = Value::Object(std::mem::take(&mut self.summary));
        self.write_json("summary.json", &summary)?;
        let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let report = json!({
            "metadata": { "unix_time": stamp, "version": env!("CARGO_PKG_VERSION") },
            "config": self.cfg,
            "summary": summary,
        });
        let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        std::fs::write(self.out.join("report.json"), s)?;
        self.files.push(self.out.join("report.json"));
        self.files.sort();
        Ok(RunOutcome { files: self.files, summary })
    }

    fn function(&self) -> Result<Option<TestFunction>> {
        self.cfg.input.function.as_deref().map(TestFunction::by_name).transpose()
    }

    /// Loads a model, or fits one to a DoE file or a sampled test function.
    fn data(&mut self) -> Result<Data> {
        let cfg = self.cfg;
        let function = self.function()?;
        if let Some(path) = &cfg.input.model {
            let model = read_model(&read(path)?)?;
            let d = model.dim();
            self.summary.insert("model".into(), json!({ "source": path, "n": model.n(), "d": d }));
            return Ok(Data { model, scaling: Scaling::identity(d) });
        }
        let doe = if let Some(path) = &cfg.input.doe {
            parse_doe(&read(path)?, cfg.input.response.as_deref())?
        } else if let Some(f) = &function {
            let d = f.dim();
            let x = maximin_lhs(cfg.input.n, d, derive_seed(cfg.seed, SEED_DESIGN), 20);
            let y: Vec<f64> = x.iter().map(|p| f.eval(p)).collect();
            let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            self.write("doe.csv", &write_doe(&names, "y", &x, &y))?;
            Doe { input_names: names, response_name: "y".into(), x, y, scaling: Scaling::identity(d) }
        } else {
            return Err(Error::invalid("no input: set input.doe, input.model or input.function"));
        };
        let y = doe.y.iter().map(|v| cfg.transform.apply(*v)).collect::<Result<Vec<f64>>>()?;
        let family = KernelFamily::from_name(&cfg.fit.kernel)
            .ok_or_else(|| Error::invalid(format!("unknown kernel '{}'", cfg.fit.kernel)))?;
        let d = doe.x[0].len();
        let trend = match cfg.fit.trend.as_str() {
            "constant" => TrendBasis::constant(),
            "linear" => TrendBasis::linear(d),
            t => return Err(Error::invalid(format!("unknown trend '{t}' (constant, linear)"))),
        };
        let fit = FitConfig { n_starts: cfg.fit.starts, seed: derive_seed(cfg.seed, SEED_FIT), ..Default::default() };
        info!("fitting {} kernel to {} points in {d} dimensions", family.name(), y.len());
        let model = GpModel::fit(doe.x, y, family, trend, &fit)?;
        self.write("model.txt", &write_model(&model))?;
        let mut fit_summary = json!({
            "n": model.n(),
            "d": d,
            "kernel": family.name(),
            "trend": cfg.fit.trend,
            "lengthscales": model.kernel().lengthscales,
            "variance": model.kernel().variance,
            "transform": cfg.transform,
            "q2_loo": model.loo_q2().ok(),
            "inputs": doe.input_names,
            "response": doe.response_name,
            "scaling": doe.scaling,
        });
        if let Some(f) = &function {
            let test = Sobol::scrambled(d, derive_seed(cfg.seed, SEED_DESIGN + 100))?.take_points(1000);
            let truth = test.iter().map(|p| cfg.transform.apply(f.eval(p))).collect::<Result<Vec<f64>>>()?;
            fit_summary["q2_holdout"] = json!(model.q2(&test, &truth).ok());
        }
        self.summary.insert("fit".into(), fit_summary);
        Ok(Data { model, scaling: doe.scaling })
    }

    /// Thresholds paired with their model-scale values.
    fn thresholds(&self, observed: Option<&[f64]>) -> Result<Vec<(f64, f64)>> {
        let t = self.cfg.profiles.tau.iter().map(|&t| Ok((t, self.cfg.transform.apply(t)?))).collect::<Result<Vec<_>>>()?;
        if let Some(y) = observed {
            let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let pad = hi - lo;
            for &(raw, m) in &t {
                if m < lo - pad || m > hi + pad {
                    warn!("threshold {raw} lies far outside the observed response range");
                }
            }
        }
        Ok(t)
    }

    fn specs_1d(&self, d: usize) -> Result<Vec<ProjectionSpec>> {
        if self.cfg.profiles.projections.is_empty() {
            return Ok((1..=d).map(ProjectionSpec::Coordinate).collect());
        }
        let specs: Vec<ProjectionSpec> =
            self.cfg.profiles.projections.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        if let Some(s) = specs.iter().find(|s| s.p() != 1) {
            return Err(Error::invalid(format!("'{s}' is not a 1-d projection; list it under pairs")));
        }
        Ok(specs)
    }

    fn specs_2d(&self, d: usize) -> Result<Vec<ProjectionSpec>> {
        if self.cfg.profiles.pairs.is_empty() {
            return Ok(if d >= 3 { vec![ProjectionSpec::Pair(1, 2)] } else { Vec::new() });
        }
        let specs: Vec<ProjectionSpec> = self.cfg.profiles.pairs.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        if let Some(s) = specs.iter().find(|s| s.p() != 2) {
            return Err(Error::invalid(format!("'{s}' is not a 2-d projection")));
        }
        Ok(specs)
    }

    fn build_uq(&mut self, model: &GpModel) -> Result<Uq> {
        let u = &self.cfg.uq;
        let pool = candidate_pool(model.dim(), derive_seed(self.cfg.seed, SEED_POOL))?;
        info!("selecting {} pilot points", u.pilots);
        let sel = select_pilot_points(model, u.pilots, &pool)?;
        let proc = ApproxProcess::new(model, sel.points)?;
        let set = simulate_realizations(&proc, u.sims, derive_seed(self.cfg.seed, SEED_SIMS));
        Ok(Uq { proc, set, halted: sel.halted })
    }

    /// Profile curve of `obj`, exact or spline-approximated, with refined
    /// partitions for each threshold.
    fn curve<O: Objective + ?Sized>(
        &self,
        obj: &O,
        proj: &Projection,
        bounds: &BoxDomain,
        pcfg: &ProfileConfig,
        taus: &[(f64, f64)],
    ) -> Result<(ProfileCurve, Vec<ExcursionIntervals>)> {
        let grid = ProfileGrid::for_projection(proj, bounds, self.cfg.profiles.grid)?;
        let curve = if self.cfg.profiles.knots > 0 {
            approximate_curve(obj, proj, bounds, &grid, self.cfg.profiles.knots, false, pcfg)?.curve
        } else {
            profile_curve(obj, proj, bounds, &grid, pcfg)?
        };
        let neg = Negated(obj);
        let sup = |e: f64| sup_at(obj, proj, bounds, &[e], None, pcfg.seed, pcfg).map(|o| o.f);
        let inf = |e: f64| sup_at(&neg, proj, bounds, &[e], None, pcfg.seed, pcfg).map(|o| -o.f);
        let parts = taus
            .iter()
            .map(|&(_, t)| match curve.provenance {
                Provenance::Exact => refine_intervals(&curve, t, &sup, &inf),
                _ => excursion_intervals(&curve, t),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((curve, parts))
    }

    fn table_rows(
        &self,
        label: &str,
        spec: &ProjectionSpec,
        proj: &Projection,
        bounds: &BoxDomain,
        taus: &[(f64, f64)],
        parts: &[ExcursionIntervals],
        scaling: &Scaling,
    ) -> Result<Vec<Value>> {
        let mut rows = Vec::new();
        for (&(raw, t), p) in taus.iter().zip(parts) {
            let mut row = json!({
                "projection": label,
                "spec": spec.to_string(),
                "tau": raw,
                "tau_model": t,
                "partition": parts_json(p),
                "excluded_measure": excluded_measure(proj, bounds, &p.non_excursion)?,
            });
            if let ProjectionSpec::Coordinate(i) = spec {
                let map = |iv: &[Interval]| {
                    json!(iv
                        .iter()
                        .map(|v| json!([scaling.to_input(i - 1, v.lo), scaling.to_input(i - 1, v.hi)]))
                        .collect::<Vec<_>>())
                };
                row["non_excursion_input_units"] = map(&p.non_excursion);
                row["excursion_input_units"] = map(&p.excursion);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    fn curves(&mut self, data: &Data, uq: Option<&Uq>) -> Result<()> {
        let model = &data.model;
        let d = model.dim();
        let bounds = BoxDomain::unit(d);
        let taus = self.thresholds(Some(model.observations()))?;
        let specs = self.specs_1d(d)?;
        let mut table = Vec::new();
        let mut uq_rows = Vec::new();
        for (k, spec) in specs.iter().enumerate() {
            let label = spec.label(k + 1);
            let proj = spec.to_projection(d)?;
            let pcfg = self.profile_config(SEED_PROFILE + k as u64);
            info!("profiles along {label}");
            let (curve, parts) = self.curve(model, &proj, &bounds, &pcfg, &taus)?;
            self.write(&format!("profile_{label}.csv"), &curve_csv(&curve))?;
            self.write_json(&format!("profile_{label}.json"), &curve_json(&curve, &parts))?;
            table.extend(self.table_rows(&label, spec, &proj, &bounds, &taus, &parts, &data.scaling)?);
            if let Some(uq) = uq {
                info!("uncertainty envelope along {label} ({} realizations)", uq.set.len());
                let env = self.envelope(uq, &proj, &bounds, &ProfileGrid::from_values(&curve.eta)?, &pcfg)?;
                self.write(&format!("envelope_{label}.csv"), &env.to_csv())?;
                let s2: Vec<f64> = env.sigma_delta.iter().map(|s| s * s).collect();
                let mut row = json!({
                    "projection": label,
                    "integrated_delta_variance": trapezoid(&curve.eta, &s2),
                    "max_sigma_delta": env.sigma_delta.iter().copied().fold(0.0, f64::max),
                    "flagged_nodes": env.flagged.iter().filter(|f| **f).count(),
                    "failures": env.failures.iter().sum::<usize>(),
                });
                let mut per_tau = Vec::new();
                for &(raw, t) in &taus {
                    let part = |upper: &[f64], lower: &[f64]| -> Result<Value> {
                        Ok(parts_json(&crate::profiles::excursion_intervals_from(&curve.eta, upper, lower, t)?))
                    };
                    per_tau.push(json!({
                        "tau": raw,
                        "quantile_lo": part(&env.sup_q_lo, &env.inf_q_lo)?,
                        "quantile_hi": part(&env.sup_q_hi, &env.inf_q_hi)?,
                        "conservative": part(&env.sup_u_hi, &env.inf_u_lo)?,
                    }));
                }
                row["thresholds"] = json!(per_tau);
                uq_rows.push(row);
            }
        }
        self.summary.insert("intervals".into(), json!(table));
        if let Some(uq) = uq {
            let u = &self.cfg.uq;
            self.summary.insert(
                "uq".into(),
                json!({
                    "pilots": uq.proc.n_pilots(),
                    "pilot_selection_halted": uq.halted,
                    "sims": uq.set.len(),
                    "alpha": u.alpha,
                    "beta": u.beta(),
                    "seed": uq.set.seed,
                    "projections": uq_rows,
                }),
            );
        }
        Ok(())
    }

    fn envelope(
        &self,
        uq: &Uq,
        proj: &Projection,
        bounds: &BoxDomain,
        grid: &ProfileGrid,
        pcfg: &ProfileConfig,
    ) -> Result<BoundEnvelope> {
        let u = &self.cfg.uq;
        uq_profiles(&uq.proc, &uq.set, proj, bounds, grid, u.alpha, u.beta(), pcfg)
    }

    fn map<O: Objective + ?Sized>(&self, obj: &O, proj: &Projection, bounds: &BoxDomain, pcfg: &ProfileConfig) -> Result<ProfileMap> {
        let n = self.cfg.profiles.lattice;
        let lattice = ProfileGrid::lattice(proj, bounds, n, n)?;
        if self.cfg.profiles.knots > 0 {
            approximate_map(obj, proj, bounds, &lattice, self.cfg.profiles.knots.max(10), pcfg)
        } else {
            bivariate_profiles(obj, proj, bounds, &lattice, pcfg)
        }
    }

    fn map_rows(&self, label: &str, m: &ProfileMap, taus: &[(f64, f64)]) -> Vec<Value> {
        let live: Vec<usize> = (0..m.grid.len()).filter(|&k| m.grid.feasible[k]).collect();
        taus.iter()
            .map(|&(raw, t)| {
                let frac = |pred: &dyn Fn(usize) -> bool| live.iter().filter(|&&k| pred(k)).count() as f64 / live.len().max(1) as f64;
                json!({
                    "projection": label,
                    "tau": raw,
                    "non_excursion_fraction": frac(&|k| m.sup[k] < t),
                    "excursion_fraction": frac(&|k| m.inf[k] >= t),
                })
            })
            .collect()
    }

    fn maps<O: Objective + ?Sized>(
        &mut self,
        obj: &O,
        d: usize,
        observed: Option<&[f64]>,
        uq: Option<&Uq>,
    ) -> Result<()> {
        let bounds = BoxDomain::unit(d);
        let taus = if observed.is_some() {
            self.thresholds(observed)?
        } else {
            self.cfg.profiles.tau.iter().map(|&t| (t, t)).collect()
        };
        let mut rows = Vec::new();
        let mut uq_rows = Vec::new();
        for (k, spec) in self.specs_2d(d)?.iter().enumerate() {
            let label = spec.label(k + 1);
            let proj = spec.to_projection(d)?;
            let pcfg = self.profile_config(SEED_MAP + k as u64);
            info!("profile map over {label}");
            let m = self.map(obj, &proj, &bounds, &pcfg)?;
            self.write(&format!("map_{label}.csv"), &map_csv(&m))?;
            self.write_json(&format!("map_{label}.json"), &map_json(&m))?;
            rows.extend(self.map_rows(&label, &m, &taus));
            if let Some(uq) = uq {
                info!("uncertainty envelope over {label}");
                let env = self.envelope(uq, &proj, &bounds, &m.grid, &pcfg)?;
                self.write(&format!("envelope_map_{label}.csv"), &env.to_csv())?;
                uq_rows.push(json!({
                    "projection": label,
                    "max_sigma_delta": env.sigma_delta.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max),
                    "flagged_nodes": env.flagged.iter().filter(|f| **f).count(),
                }));
            }
        }
        self.summary.insert("maps".into(), json!(rows));
        if uq.is_some() {
            self.summary.insert("map_uq".into(), json!(uq_rows));
        }
        Ok(())
    }

    fn demo(&mut self) -> Result<()> {
        let name = self.cfg.input.function.clone().unwrap_or_else(|| "analytic2d-excursion".into());
        let f = TestFunction::by_name(&name)?;
        let d = f.dim();
        self.summary.insert("function".into(), json!(name));
        let bounds = BoxDomain::unit(d);
        let taus: Vec<(f64, f64)> = self.cfg.profiles.tau.iter().map(|&t| (t, t)).collect();
        let mut table = Vec::new();
        for (k, spec) in self.specs_1d(d)?.iter().enumerate() {
            let label = spec.label(k + 1);
            let proj = spec.to_projection(d)?;
            let pcfg = self.profile_config(SEED_PROFILE + k as u64);
            let (curve, parts) = self.curve(&f, &proj, &bounds, &pcfg, &taus)?;
            self.write(&format!("profile_{label}.csv"), &curve_csv(&curve))?;
            self.write_json(&format!("profile_{label}.json"), &curve_json(&curve, &parts))?;
            table.extend(self.table_rows(&label, spec, &proj, &bounds, &taus, &parts, &Scaling::identity(d))?);
        }
        self.summary.insert("intervals".into(), json!(table));
        if !self.cfg.profiles.pairs.is_empty() || d >= 3 {
            self.maps(&f, d, None, None)?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config(out: &Path) -> RunConfig {
        let mut c = RunConfig { mode: Mode::Demo, out: out.to_path_buf(), ..Default::default() };
        c.profiles.projections = vec!["1".into()];
        c
    }

    #[test]
    fn demo_reports_the_coordinate_interval() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&demo_config(dir.path())).unwrap();
        let ne = &out.summary["intervals"][0]["partition"]["non_excursion"];
        assert_eq!(ne.as_array().unwrap().len(), 1);
        assert_eq!(ne[0][0].as_f64().unwrap(), 0.0);
        assert!((ne[0][1].as_f64().unwrap() - 0.13).abs() < 0.01);
        assert!(dir.path().join("profile_x1.csv").exists());
    }

    #[test]
    fn missing_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { mode: Mode::Fit, out: dir.path().to_path_buf(), ..Default::default() };
        assert!(run(&c).is_err());
    }

    #[test]
    fn sqrt_transform_maps_thresholds() {
        let c = RunConfig { transform: Transform::Sqrt, ..Default::default() };
        let mut c2 = c.clone();
        c2.profiles.tau = vec![4.0, 0.25];
        let r = Runner { cfg: &c2, out: PathBuf::new(), files: Vec::new(), summary: Map::new() };
        assert_eq!(r.thresholds(None).unwrap(), vec![(4.0, 2.0), (0.25, 0.5)]);
        c2.profiles.tau = vec![-1.0];
        let r = Runner { cfg: &c2, out: PathBuf::new(), files: Vec::new(), summary: Map::new() };
        assert!(r.thresholds(None).is_err());
    }
}
