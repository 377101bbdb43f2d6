//! Run configuration, read from TOML.
//!
//! ```toml
//! mode = "pipeline"        # fit | profile | uq | bivariate | pipeline | demo
//! seed = 7
//! threads = 0              # 0: all cores
//! out = "results"
//! transform = "sqrt"       # none | sqrt, applied to observations and thresholds
//!
//! [input]
//! doe = "doe.csv"          # or `model = "model.txt"`, or `function = "synthetic5d"`
//! response = "y"
//!
//! [fit]
//! kernel = "matern32"
//! trend = "linear"
//!
//! [profiles]
//! tau = [0.5, 1.0]
//! projections = ["1", "dir:1,1,0,0,0"]
//! pairs = ["pair:1,2"]
//!
//! [uq]
//! pilots = 300
//! sims = 600
//! alpha = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fit,
    Profile,
    Uq,
    Bivariate,
    Pipeline,
    Demo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Sqrt,
}

impl Transform {
    pub fn apply(self, v: f64) -> Result<f64> {
        match self {
            Transform::None => Ok(v),
            Transform::Sqrt if v >= 0.0 => Ok(v.sqrt()),
            Transform::Sqrt => Err(Error::invalid(format!("square-root transform of negative value {v}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Design of experiments, one row per run.
    pub doe: Option<PathBuf>,
    /// Response column of the DoE; the last column when absent.
    pub response: Option<String>,
    /// Previously fitted model; skips fitting.
    pub model: Option<PathBuf>,
    /// Registered test function. Sampled on a maximin design of `n` points
    /// when no DoE is given; profiled directly in demo mode.
    pub function: Option<String>,
    pub n: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { doe: None, response: None, model: None, function: None, n: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub kernel: String,
    /// `constant` or `linear`.
    pub trend: String,
    pub starts: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { kernel: "matern52".into(), trend: "constant".into(), starts: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    /// Thresholds in output units.
    pub tau: Vec<f64>,
    /// 1-d projections; every coordinate when empty.
    pub projections: Vec<String>,
    /// 2-d projections; the first two coordinates when empty.
    pub pairs: Vec<String>,
    pub grid: usize,
    pub lattice: usize,
    /// Knots of the spline approximation; 0 evaluates every node exactly.
    pub knots: usize,
    pub starts: Option<usize>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            tau: vec![0.0],
            projections: Vec::new(),
            pairs: Vec::new(),
            grid: 100,
            lattice: 30,
            knots: 0,
            starts: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqSection {
    pub pilots: usize,
    /// Posterior quasi-realizations; 0 skips the UQ stages.
    pub sims: usize,
    pub alpha: f64,
    /// `alpha / 4` when absent.
    pub beta: Option<f64>,
}

impl Default for UqSection {
    fn default() -> Self {
        UqSection { pilots: 80, sims: 150, alpha: 0.1, beta: None }
    }
}

impl UqSection {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.alpha / 4.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub transform: Transform,
    pub input: InputConfig,
    pub fit: FitSection,
    pub profiles: ProfileSection,
    pub uq: UqSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Pipeline,
            seed: 0,
            threads: 0,
            out: PathBuf::from("profex-out"),
            transform: Transform::None,
            input: InputConfig::default(),
            fit: FitSection::default(),
            profiles: ProfileSection::default(),
            uq: UqSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative input paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.input.doe, &mut cfg.input.model].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.profiles;
        if p.grid < 2 || p.lattice < 2 {
            return Err(Error::invalid("grid and lattice need at least 2 points per axis"));
        }
        if p.knots != 0 && p.knots < 4 {
            return Err(Error::invalid("spline approximation needs at least 4 knots"));
        }
        if p.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("thresholds must be finite"));
        }
        let u = &self.uq;
        if u.sims > 0 {
            if u.pilots == 0 {
                return Err(Error::invalid("UQ needs at least one pilot point"));
            }
            let b = u.beta();
            if !(u.alpha < 1.0 && b > 0.0 && u.alpha > 2.0 * b) {
                return Err(Error::invalid(format!("levels need 1 > alpha > 2 beta > 0, got alpha={}, beta={b}", u.alpha)));
            }
        }
        Ok(())
    }
}
