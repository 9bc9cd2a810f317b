//! `walkbound`: batch front-end for the kernel, harmonicity and Fock
//! computations.
//!
//! Exit codes: 0 success, 1 an exact identity failed, 2 a tolerance
//! criterion was not met, 3 configuration or resource error.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use walkbound::convolution::ConvolutionError;
use walkbound::fock::FockError;
use walkbound::group::GroupError;
use walkbound::harmonic::HarmonicError;
use walkbound::kernel::KernelError;
use walkbound::measure::MeasureError;
use walkbound::scalar::ScalarError;

use crate::config::{RunConfig, Truncation};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Parser)]
#[command(name = "walkbound", version, about = "Boundary kernels of random walks on groups")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for config-file keys.
#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Group descriptor, e.g. free:2 or product(free:2;cyclic:2)
    #[arg(long, global = true)]
    group: Option<String>,
    /// Measure preset: simple | lazy-simple | example-f2c2
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Weight at the identity for lazy-simple (p/q)
    #[arg(long, global = true)]
    laziness: Option<String>,
    /// Parameter of example-f2c2 (p/q)
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// rational | float:<digits>
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Ball radius for scans and checks
    #[arg(long, global = true)]
    radius: Option<u32>,
    /// Space-time level cap M
    #[arg(long, global = true)]
    max_level: Option<u64>,
    /// Series cap for Green and Martin kernels
    #[arg(long, global = true)]
    k_max: Option<u64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Horizon for ratio limits, spectral radius, Gerl ratios and peaking candidates
    #[arg(long, global = true)]
    n_max: Option<u64>,
    #[arg(long, global = true)]
    max_atoms: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Power-cache directory (else the config key, else WALKBOUND_CACHE_DIR)
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Do not print the JSON summary
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
pub enum Command {
    /// Measure properties within the ball radius
    Validate,
    /// Convolution powers with mass and Chapman–Kolmogorov checks
    Convolve(commands::ConvolveArgs),
    /// Spectral radius from return probabilities
    SpectralRadius,
    /// Ratios P^{k+1}(x,y)/P^k(x,y)
    Gerl(commands::PairArgs),
    /// Green function G(x,y|λ)
    Green(commands::LambdaArgs),
    /// Martin kernel K(x,y|λ)
    Martin(commands::MartinArgs),
    /// Ratio-limit kernel H(x,y)
    RatioLimit(commands::RatioLimitArgs),
    /// Ratio-limit radical membership of y
    Radical(commands::TargetArgs),
    /// Space-time kernel K_ST((x,m),(y,n))
    SpaceTime(commands::SpaceTimeArgs),
    /// Zero-level Martin kernel K₀(·,y) over the ball
    ZeroMartin(commands::TargetArgs),
    /// λ^{|x|}K(x,y|λ) → K₀(x,y) as λ → 0
    RescaledLimit(commands::RescaledArgs),
    /// Residuals of a tabulated function
    HarmonicCheck(commands::HarmonicArgs),
    /// The F₂ × ℤ/2ℤ example with its three limits
    ExampleF2c2(commands::ExampleArgs),
    /// Peaking inequality for the return operator
    Peaking(commands::PeakingArgs),
    /// Truncated quotient-norm upper bound
    QuotientBound(commands::QuotientArgs),
    /// Exact-invariant suite on small instances
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Convolve(_) => "convolve",
            Command::SpectralRadius => "spectral-radius",
            Command::Gerl(_) => "gerl",
            Command::Green(_) => "green",
            Command::Martin(_) => "martin",
            Command::RatioLimit(_) => "ratio-limit",
            Command::Radical(_) => "radical",
            Command::SpaceTime(_) => "space-time",
            Command::ZeroMartin(_) => "zero-martin",
            Command::RescaledLimit(_) => "rescaled-limit",
            Command::HarmonicCheck(_) => "harmonic-check",
            Command::ExampleF2c2(_) => "example-f2c2",
            Command::Peaking(_) => "peaking",
            Command::QuotientBound(_) => "quotient-bound",
            Command::Selftest => "selftest",
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &common.group {
        cfg.group = Some(g.parse()?);
    }
    if let Some(p) = &common.preset {
        cfg.measure.preset = Some(p.clone());
        cfg.measure.atoms.clear();
    }
    if let Some(v) = &common.laziness {
        cfg.measure.laziness = v.clone();
    }
    if let Some(v) = &common.alpha {
        cfg.measure.alpha = v.clone();
    }
    if let Some(v) = &common.mode {
        cfg.mode = v.clone();
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    let t: &mut Truncation = &mut cfg.truncation;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = common.$flag { t.$field = v; })*
        };
    }
    set!(radius => ball_radius, max_level => max_level, k_max => k_max, eps => eps,
         tol => tol, n_max => n_max, max_atoms => max_atoms);
    if let Some(v) = &common.out {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = &common.cache_dir {
        cfg.cache.dir = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = resolve(&cli.common)?;
    let name = cli.command.name();
    let outcome = commands::run(&cli.command, &cfg)?;
    let (doc, _) = output::write(&cfg.output.dir, name, &cfg, &outcome)?;
    if !cli.common.quiet {
        // The files are already written; a closed stdout (`| head`) is not an error.
        let mut out = std::io::stdout().lock();
        match writeln!(out, "{}", serde_json::to_string_pretty(&doc)?) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        }
    }
    Ok(outcome.status.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
