use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use profex::pipeline::{run, Mode, RunConfig};

/// Profile extrema of Gaussian-process emulators.
///
/// Settings come from `--config` (TOML); flags override the file. Set
/// PROFEX_LOG=info (or debug) for progress messages.
#[derive(Parser, Debug)]
#[command(name = "profex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the emulator and report Q2.
    Fit(Flags),
    /// Profile extrema of the posterior mean along 1-d projections.
    Profile(Flags),
    /// 1-d profiles with quantile envelopes and conservative bounds.
    Uq(Flags),
    /// Profile maps over 2-d projections.
    Bivariate(Flags),
    /// Fit, 1-d profiles with UQ, then 2-d maps.
    Pipeline(Flags),
    /// Profiles of a registered test function (no emulator).
    Demo {
        /// analytic2d, analytic2d-excursion, analytic3d or synthetic5d.
        #[arg(default_value = "analytic2d-excursion")]
        function: String,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core [default: 0].
    #[arg(long)]
    threads: Option<usize>,
    /// Threshold in output units; repeat for several [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    tau: Vec<f64>,
    /// 1-d projection (`3`, `x3`, `dir:1,1,0`) or, for bivariate,
    /// a pair (`pair:1,2`, `plane:1,0,0;0,1,1`); repeatable.
    #[arg(long)]
    projection: Vec<String>,
    /// Points of 1-d grids [default: 100].
    #[arg(long)]
    grid: Option<usize>,
    /// Points per axis of 2-d lattices [default: 30].
    #[arg(long)]
    lattice: Option<usize>,
    /// Pilot points [default: 80].
    #[arg(long)]
    pilots: Option<usize>,
    /// Posterior quasi-realizations; 0 skips UQ [default: 150].
    #[arg(long)]
    sims: Option<usize>,
    /// Confidence level of the bounds [default: 0.1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory [default: profex-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// DoE CSV (header row, response in the last column).
    #[arg(long)]
    doe: Option<PathBuf>,
    /// Fitted model file.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn build_config(mode: Mode, f: Flags, function: Option<String>) -> profex::Result<RunConfig> {
    let mut c = match &f.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    c.mode = mode;
    if let Some(v) = f.seed {
        c.seed = v;
    }
    if let Some(v) = f.threads {
        c.threads = v;
    }
    if !f.tau.is_empty() {
        c.profiles.tau = f.tau;
    }
    if !f.projection.is_empty() {
        if mode == Mode::Bivariate {
            c.profiles.pairs = f.projection;
        } else {
            c.profiles.projections = f.projection;
        }
    }
    if let Some(v) = f.grid {
        c.profiles.grid = v;
    }
    if let Some(v) = f.lattice {
        c.profiles.lattice = v;
    }
    if let Some(v) = f.pilots {
        c.uq.pilots = v;
    }
    if let Some(v) = f.sims {
        c.uq.sims = v;
    }
    if let Some(v) = f.alpha {
        c.uq.alpha = v;
    }
    if let Some(v) = f.out {
        c.out = v;
    }
    if let Some(v) = f.doe {
        c.input.doe = Some(v);
    }
    if let Some(v) = f.model {
        c.input.model = Some(v);
    }
    if function.is_some() {
        c.input.function = function;
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROFEX_LOG", "warn")).init();
    let cli = Cli::parse();
    let config = match cli.command {
        Command::Fit(f) => build_config(Mode::Fit, f, None),
        Command::Profile(f) => build_config(Mode::Profile, f, None),
        Command::Uq(f) => build_config(Mode::Uq, f, None),
        Command::Bivariate(f) => build_config(Mode::Bivariate, f, None),
        Command::Pipeline(f) => build_config(Mode::Pipeline, f, None),
        Command::Demo { function, flags } => build_config(Mode::Demo, flags, Some(function)),
    };
    let outcome = config.and_then(|c| run(&c));
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("profex: {e}");
            ExitCode::FAILURE
        }
    }
}
