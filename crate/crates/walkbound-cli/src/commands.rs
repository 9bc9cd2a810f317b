use std::path::PathBuf;

use clap::{Args, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};
use walkbound::convolution::{PowerCache, RadialFreeWalk, Transitions};
use walkbound::example::{Limit, F2C2};
use walkbound::fock::{
    build_q, build_s, build_t, conjugate_by_unitary, diagonal_identity_check, enumerate_basis,
    peaking_experiment, quotient_norm_upper_bound, FockSpace, PeakingOptions, BASIS_BUDGET,
};
use walkbound::group::{GroupElement, GroupModel, WordNormTable};
use walkbound::harmonic::{
    check_infinity_harmonic, check_space_time_harmonic, check_t_harmonic, dominance_check, lift_lambda,
    minimality_recursion_check, parse_value, BallFunction, SpaceTimeDomain, SpaceTimeFunction,
};
use walkbound::kernel::{
    gerl_ratio, green, in_space_time, martin_grid, martin_kernel_at_r, radical_membership, ratio_limit_batch,
    rescaled_limit_batch, space_time_batch, spectral_radius, zero_martin_batch, KernelResult, RatioLimitOptions,
    SeriesOptions, SpaceTimePoint,
};
use walkbound::measure::Measure;
use walkbound::report::HarmonicReport;
use walkbound::scalar::{ratio, BigFloat, Mode, Precision, Scalar};

use crate::config::RunConfig;
use crate::output::{Outcome, Status};
use crate::{CliError, Command};

#[derive(Args)]
pub struct ConvolveArgs {
    /// Highest power
    #[arg(long, default_value_t = 10)]
    pub n: u64,
    /// Emit the distribution of the highest power instead of the summary table
    #[arg(long)]
    pub distribution: bool,
}

#[derive(Args)]
pub struct PairArgs {
    #[arg(long, default_value = "e")]
    pub x: String,
    #[arg(long, default_value = "e")]
    pub y: String,
    /// Proceed on a non-lazy measure
    #[arg(long)]
    pub allow_nonlazy: bool,
}

#[derive(Args)]
pub struct LambdaArgs {
    #[arg(long, default_value = "e")]
    pub x: String,
    #[arg(long, default_value = "e")]
    pub y: String,
    /// Repeatable; p/q or decimal
    #[arg(long = "lambda", default_value = "1/2")]
    pub lambdas: Vec<String>,
}

#[derive(Args)]
pub struct MartinArgs {
    #[command(flatten)]
    pub series: LambdaArgs,
    /// Also extrapolate the λ sequence to this radius R
    #[arg(long)]
    pub at_radius: Option<f64>,
}

#[derive(Args)]
pub struct RatioLimitArgs {
    /// Repeatable; defaults to the ball
    #[arg(long)]
    pub x: Vec<String>,
    /// Repeatable; defaults to the ball
    #[arg(long)]
    pub y: Vec<String>,
    #[arg(long)]
    pub allow_nonlazy: bool,
}

#[derive(Args)]
pub struct TargetArgs {
    #[arg(long)]
    pub y: String,
    #[arg(long)]
    pub allow_nonlazy: bool,
}

#[derive(Args)]
pub struct SpaceTimeArgs {
    /// Source point x@m
    #[arg(long, default_value = "e@0")]
    pub from: String,
    /// Repeatable target points y@n
    #[arg(long, required = true)]
    pub to: Vec<String>,
}

#[derive(Args)]
pub struct RescaledArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    /// Repeatable, decreasing; defaults to 2^-3, …, 2^-10
    #[arg(long = "lambda")]
    pub lambdas: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    /// P h = t·h
    T,
    /// ∞-harmonic against the truncated measures
    Infinity,
    /// Space-time harmonic; input lines are element,level,value
    SpaceTime,
}

#[derive(Args)]
pub struct HarmonicArgs {
    /// CSV of element,value (or element,level,value)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "t")]
    pub kind: Kind,
    /// Eigenvalue for --kind t
    #[arg(long, default_value = "1")]
    pub t: String,
}

#[derive(Args)]
pub struct ExampleArgs {
    /// Largest sequence index
    #[arg(long, default_value_t = 8)]
    pub n: usize,
}

#[derive(Args)]
pub struct PeakingArgs {
    /// Radius estimate R; fitted from return probabilities up to M when absent
    #[arg(long)]
    pub r_est: Option<f64>,
    /// Level cap for the matrix cross-check
    #[arg(long, default_value_t = 8)]
    pub identity_level: u64,
}

#[derive(Args)]
pub struct QuotientArgs {
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[arg(long)]
    pub r_est: Option<f64>,
}

/// Runs `$f::<S>(ctx, …)` with the scalar type of the configured mode.
macro_rules! with_scalar {
    ($cfg:expr, $f:ident($($arg:expr),*)) => {
        match $cfg.mode()? {
            Mode::Rational => $f::<BigRational>(&(), $($arg),*),
            Mode::Float { digits } => {
                let p = Precision::from_digits(digits)?;
                $f::<BigFloat>(&p, $($arg),*)
            }
        }
    };
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mu = cfg.build_measure()?;
    match command {
        Command::Validate => Ok(validate(cfg, &mu)),
        Command::Convolve(a) => with_scalar!(cfg, convolve(cfg, &mu, a)),
        Command::SpectralRadius => with_scalar!(cfg, spectral(cfg, &mu)),
        Command::Gerl(a) => with_scalar!(cfg, gerl(cfg, &mu, a)),
        Command::Green(a) => with_scalar!(cfg, green_cmd(cfg, &mu, a)),
        Command::Martin(a) => with_scalar!(cfg, martin(cfg, &mu, a)),
        Command::RatioLimit(a) => with_scalar!(cfg, ratio_limit(cfg, &mu, a)),
        Command::Radical(a) => with_scalar!(cfg, radical(cfg, &mu, a)),
        Command::SpaceTime(a) => with_scalar!(cfg, space_time(cfg, &mu, a)),
        Command::ZeroMartin(a) => with_scalar!(cfg, zero_martin(cfg, &mu, a)),
        Command::RescaledLimit(a) => with_scalar!(cfg, rescaled(cfg, &mu, a)),
        Command::HarmonicCheck(a) => with_scalar!(cfg, harmonic(cfg, &mu, a)),
        Command::ExampleF2c2(a) => exact_only(cfg, "example-f2c2").and_then(|_| example(cfg, a)),
        Command::Peaking(a) => exact_only(cfg, "peaking").and_then(|_| peaking(cfg, &mu, a)),
        Command::QuotientBound(a) => exact_only(cfg, "quotient-bound").and_then(|_| quotient(cfg, &mu, a)),
        Command::Selftest => exact_only(cfg, "selftest").and_then(|_| selftest(cfg)),
    }
}

fn exact_only(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    match cfg.mode()? {
        Mode::Rational => Ok(()),
        Mode::Float { .. } => Err(CliError::Config(format!("{name} runs in rational mode only"))),
    }
}

// ---------------------------------------------------------------------------
// helpers

fn element(model: &GroupModel, text: &str) -> Result<GroupElement, CliError> {
    if text.trim() == "e" {
        return Ok(model.identity());
    }
    Ok(model.parse(text)?)
}

fn point(model: &GroupModel, text: &str) -> Result<SpaceTimePoint, CliError> {
    let (x, m) = text
        .rsplit_once('@')
        .ok_or_else(|| CliError::Config(format!("expected element@level, got {text:?}")))?;
    let m = m
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad level in {text:?}")))?;
    Ok(SpaceTimePoint::new_unchecked(element(model, x)?, m))
}

fn lambda<S: Scalar>(ctx: &S::Context, text: &str) -> Result<S, CliError> {
    let q = parse_value(text).ok_or_else(|| CliError::Config(format!("bad λ {text:?}")))?;
    Ok(S::lift(ctx, &q))
}

/// Radial walk on free groups with a uniform measure, else the cached
/// convolution powers.
fn make_walk<S: Scalar>(cfg: &RunConfig, mu: &Measure, ctx: &S::Context) -> Result<Box<dyn Transitions<S>>, CliError> {
    if matches!(mu.model(), GroupModel::Free { .. }) {
        if let Ok(w) = RadialFreeWalk::<S>::new(mu.clone(), ctx.clone()) {
            return Ok(Box::new(w));
        }
    }
    Ok(Box::new(power_cache::<S>(cfg, mu, ctx)?))
}

fn power_cache<S: Scalar>(cfg: &RunConfig, mu: &Measure, ctx: &S::Context) -> Result<PowerCache<S>, CliError> {
    let mut w = PowerCache::<S>::new(mu.clone(), ctx.clone())?.with_max_atoms(cfg.truncation.max_atoms);
    if let Some(dir) = cfg.cache_dir() {
        w = w.with_persistence(dir);
    }
    Ok(w)
}

fn series(cfg: &RunConfig) -> SeriesOptions {
    SeriesOptions {
        eps: cfg.truncation.eps,
        k_max: cfg.truncation.k_max,
        radius: None,
    }
}

fn kernel_row<S: Scalar>(lead: Vec<String>, r: &KernelResult<S>) -> Vec<String> {
    let mut row = lead;
    row.extend([
        r.value.render(),
        r.truncation.to_string(),
        r.tail_estimate.to_string(),
        r.converged.to_string(),
    ]);
    row
}

/// Exact mode: any residual is a violation; float mode: above `tol` is unmet.
fn residual_status<S: Scalar>(r: &HarmonicReport<S>, tol: f64) -> Status {
    if r.passes(tol) {
        Status::Ok
    } else if S::EXACT {
        Status::Violation
    } else {
        Status::NonConverged
    }
}

fn report_json<S: Scalar>(r: &HarmonicReport<S>) -> Value {
    json!({
        "checked": r.checked,
        "max_residual": r.max_residual.render(),
        "argmax": r.argmax,
        "exact": r.exact,
    })
}

fn ball(mu: &Measure, radius: u32) -> Vec<GroupElement> {
    WordNormTable::new(mu, radius).elements().to_vec()
}

// ---------------------------------------------------------------------------
// commands

fn validate(cfg: &RunConfig, mu: &Measure) -> Outcome {
    let flags = mu.validate(cfg.truncation.ball_radius);
    let model = mu.model();
    let unreachable: Vec<String> = flags.unreachable.iter().map(|g| model.format(g)).collect();
    let mut out = Outcome::new(vec!["property", "value"]);
    let props = [
        ("atoms", mu.atoms().len().to_string()),
        ("lazy", flags.lazy.to_string()),
        ("symmetric", flags.symmetric.to_string()),
        ("radius", flags.radius.to_string()),
        ("admissible_within_radius", flags.admissible_within_radius.to_string()),
        ("unreachable", unreachable.join(" ")),
    ];
    for (k, v) in &props {
        out.row(vec![k.to_string(), v.clone()]);
    }
    out.summary = json!({
        "atoms": mu.atoms().iter().map(|(g, w)| json!([model.format(g), w.to_string()])).collect::<Vec<_>>(),
        "lazy": flags.lazy,
        "symmetric": flags.symmetric,
        "admissible_within_radius": flags.admissible_within_radius,
        "radius": flags.radius,
        "unreachable": unreachable,
    });
    out
}

fn convolve<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &ConvolveArgs) -> Result<Outcome, CliError> {
    let mut w = power_cache::<S>(cfg, mu, ctx)?;
    let tol = cfg.truncation.tol;
    let one = S::one_with(ctx);
    if a.distribution {
        let d = w.power(a.n)?;
        let mut out = Outcome::new(vec!["element", "probability"]);
        for (g, v) in d.entries() {
            out.row(vec![mu.model().format(g), v.render()]);
        }
        let mass = d.total_mass(ctx);
        out.summary = json!({ "n": a.n, "support": d.entries().len(), "total_mass": mass.render() });
        return Ok(out);
    }
    let mut out = Outcome::new(vec!["n", "support", "total_mass", "ck_max_residual"]);
    let mut worst_mass = 0.0f64;
    let mut worst_ck = S::zero_with(ctx);
    for n in 0..=a.n {
        let mass = w.total_mass(n)?;
        let gap = mass.minus(&one).abs_value();
        worst_mass = worst_mass.max(gap.as_f64());
        if !gap.is_zero_value() {
            out.flag(if S::EXACT || gap.as_f64() > tol { Status::Violation } else { Status::Ok });
        }
        let mut ck = S::zero_with(ctx);
        for k in 0..=n {
            let r = w.chapman_kolmogorov_check(k, n - k)?;
            out.flag(residual_status(&r, tol));
            if r.max_residual > ck {
                ck = r.max_residual;
            }
        }
        if ck > worst_ck {
            worst_ck = ck.clone();
        }
        out.row(vec![n.to_string(), w.support_size(n)?.to_string(), mass.render(), ck.render()]);
    }
    out.summary = json!({
        "n_max": a.n,
        "max_mass_defect": worst_mass,
        "max_chapman_kolmogorov_residual": worst_ck.render(),
    });
    Ok(out)
}

fn spectral<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure) -> Result<Outcome, CliError> {
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let est = spectral_radius::<S, _>(w.as_mut(), cfg.truncation.n_max)?;
    let mut out = Outcome::new(vec!["n", "lower_bound"]);
    for (n, r) in &est.lower_bounds {
        out.row(vec![n.to_string(), r.to_string()]);
    }
    if est.monotone == Some(false) {
        out.flag(Status::Violation);
    }
    out.summary = json!({
        "spectral_radius": est.extrapolated,
        "radius": est.radius(),
        "beta": est.beta,
        "window": [est.window.0, est.window.1],
        "monotone": est.monotone,
        "last_lower_bound": est.last_lower_bound(),
    });
    Ok(out)
}

fn gerl<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &PairArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let (x, y) = (element(model, &a.x)?, element(model, &a.y)?);
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let seq = gerl_ratio::<S, _>(w.as_mut(), &x, &y, cfg.truncation.n_max, cfg.truncation.tol, a.allow_nonlazy)?;
    let mut out = Outcome::new(vec!["k", "ratio"]);
    for (k, r) in seq.ratios.iter().enumerate() {
        out.row(vec![k.to_string(), r.as_ref().map_or_else(String::new, S::render)]);
    }
    if !seq.converged {
        out.flag(Status::NonConverged);
    }
    out.summary = json!({
        "x": a.x, "y": a.y,
        "last": seq.last().map(S::render),
        "converged": seq.converged,
        "spread": seq.spread,
    });
    Ok(out)
}

fn green_cmd<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &LambdaArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let (x, y) = (element(model, &a.x)?, element(model, &a.y)?);
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let mut out = Outcome::new(vec!["lambda", "value", "truncation", "tail_estimate", "converged"]);
    for text in &a.lambdas {
        let r = green::<S, _>(w.as_mut(), &x, &y, &lambda::<S>(ctx, text)?, &series(cfg))?;
        if !r.converged {
            out.flag(Status::NonConverged);
        }
        out.row(kernel_row(vec![text.clone()], &r));
    }
    out.summary = json!({ "x": a.x, "y": a.y, "values": out.rows.iter().map(|r| r[1].clone()).collect::<Vec<_>>() });
    Ok(out)
}

fn martin<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &MartinArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let s = &a.series;
    let (x, y) = (element(model, &s.x)?, element(model, &s.y)?);
    let lams: Vec<S> = s.lambdas.iter().map(|t| lambda::<S>(ctx, t)).collect::<Result<_, _>>()?;
    let mut opts = series(cfg);
    opts.radius = a.at_radius;
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let grid = martin_grid::<S, _>(w.as_mut(), &[(x.clone(), y.clone())], &lams, &opts)?;
    let mut out = Outcome::new(vec!["lambda", "value", "truncation", "tail_estimate", "converged"]);
    for (text, per_lambda) in s.lambdas.iter().zip(&grid) {
        let r = &per_lambda[0];
        if !r.converged {
            out.flag(Status::NonConverged);
        }
        out.row(kernel_row(vec![text.clone()], r));
    }
    let mut summary = json!({ "x": s.x, "y": s.y });
    if let Some(radius) = a.at_radius {
        let r = martin_kernel_at_r::<S, _>(w.as_mut(), &x, &y, &lams, radius, cfg.truncation.tol, &opts)?;
        if !r.converged {
            out.flag(Status::NonConverged);
        }
        out.row(kernel_row(vec![format!("R={radius}")], &r));
        summary["at_radius"] = json!({ "value": r.value.render(), "converged": r.converged, "tail_estimate": r.tail_estimate });
    }
    out.summary = summary;
    Ok(out)
}

fn ratio_options(cfg: &RunConfig, allow_nonlazy: bool) -> RatioLimitOptions {
    RatioLimitOptions {
        n_max: cfg.truncation.n_max,
        tol: cfg.truncation.tol,
        allow_nonlazy,
    }
}

fn ratio_limit<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &RatioLimitArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let default = ball(mu, cfg.truncation.ball_radius);
    let pick = |given: &[String]| -> Result<Vec<GroupElement>, CliError> {
        if given.is_empty() {
            Ok(default.clone())
        } else {
            given.iter().map(|t| element(model, t)).collect()
        }
    };
    let (xs, ys) = (pick(&a.x)?, pick(&a.y)?);
    let pairs: Vec<_> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone()))).collect();
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let est = ratio_limit_batch::<S, _>(w.as_mut(), &pairs, &ratio_options(cfg, a.allow_nonlazy))?;
    let mut out = Outcome::new(vec!["x", "y", "h", "raw", "spread", "converged"]);
    let mut unconverged = 0;
    for ((x, y), e) in pairs.iter().zip(&est) {
        if !e.result.converged {
            unconverged += 1;
        }
        out.row(vec![
            model.format(x),
            model.format(y),
            e.result.value.render(),
            e.raw.render(),
            e.spread.to_string(),
            e.result.converged.to_string(),
        ]);
    }
    if unconverged > 0 {
        out.flag(Status::NonConverged);
    }
    out.summary = json!({ "pairs": pairs.len(), "unconverged": unconverged, "n_max": cfg.truncation.n_max });
    Ok(out)
}

fn radical<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &TargetArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let y = element(model, &a.y)?;
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let ev = radical_membership::<S, _>(
        w.as_mut(),
        &y,
        cfg.truncation.ball_radius,
        cfg.truncation.tol,
        &ratio_options(cfg, a.allow_nonlazy),
    )?;
    let worst = ev.worst.as_ref().map(|g| model.format(g));
    let mut out = Outcome::new(vec!["y", "member", "worst", "worst_gap", "all_converged", "checked"]);
    out.row(vec![
        a.y.clone(),
        ev.member.to_string(),
        worst.clone().unwrap_or_default(),
        ev.worst_gap.to_string(),
        ev.all_converged.to_string(),
        ev.checked.to_string(),
    ]);
    if !ev.all_converged {
        out.flag(Status::NonConverged);
    }
    out.summary = json!({
        "y": a.y, "member": ev.member, "worst": worst, "worst_gap": ev.worst_gap,
        "all_converged": ev.all_converged, "checked": ev.checked,
    });
    Ok(out)
}

fn space_time<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &SpaceTimeArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let from = point(model, &a.from)?;
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let mut members = Vec::new();
    let mut out = Outcome::new(vec!["from", "to", "in_space_time", "value"]);
    let targets: Vec<SpaceTimePoint> = a.to.iter().map(|t| point(model, t)).collect::<Result<_, _>>()?;
    for p in &targets {
        members.push(in_space_time::<S, _>(w.as_mut(), &p.z, p.m)?);
    }
    let pairs: Vec<_> = targets
        .iter()
        .zip(&members)
        .filter(|(_, &m)| m)
        .map(|(p, _)| (from.clone(), p.clone()))
        .collect();
    let mut values = space_time_batch::<S, _>(w.as_mut(), &pairs)?.into_iter();
    for (text, member) in a.to.iter().zip(&members) {
        let v = if *member { values.next().map(|v| v.render()).unwrap_or_default() } else { String::new() };
        out.row(vec![a.from.clone(), text.clone(), member.to_string(), v]);
    }
    out.summary = json!({ "from": a.from, "targets": a.to.len(), "in_space_time": members.iter().filter(|&&m| m).count() });
    Ok(out)
}

fn zero_martin<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &TargetArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let y = element(model, &a.y)?;
    let r = cfg.truncation.ball_radius;
    let table = WordNormTable::new(mu, r.max(cfg.truncation.max_level as u32));
    let ny = table.norm(&y).ok_or_else(|| {
        CliError::Config(format!("{} lies beyond radius {}; raise max_level", a.y, table.radius()))
    })?;
    let xs = table.ball(r).to_vec();
    let pairs: Vec<_> = xs.iter().map(|x| (x.clone(), y.clone())).collect();
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let values = zero_martin_batch::<S, _>(w.as_mut(), &pairs, &table)?;
    let mut out = Outcome::new(vec!["x", "norm", "aligned", "k0"]);
    let mut aligned_count = 0;
    for (x, v) in xs.iter().zip(&values) {
        let aligned = table.is_aligned(x, &y)?;
        aligned_count += usize::from(aligned);
        out.row(vec![
            model.format(x),
            table.norm(x).unwrap_or_default().to_string(),
            aligned.to_string(),
            v.render(),
        ]);
    }
    out.summary = json!({ "y": a.y, "norm": ny, "ball_radius": r, "aligned": aligned_count });
    Ok(out)
}

fn rescaled<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &RescaledArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let r = cfg.truncation.ball_radius;
    let lams: Vec<S> = if a.lambdas.is_empty() {
        (3..=10).map(|k| S::lift(ctx, &ratio(1, 1 << k))).collect()
    } else {
        a.lambdas.iter().map(|t| lambda::<S>(ctx, t)).collect::<Result<_, _>>()?
    };
    let table = WordNormTable::new(mu, 2 * r);
    let xs = match &a.x {
        Some(t) => vec![element(model, t)?],
        None => table.ball(r).to_vec(),
    };
    let ys = match &a.y {
        Some(t) => vec![element(model, t)?],
        None => table.ball(r).to_vec(),
    };
    let pairs: Vec<_> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone()))).collect();
    let mut w = make_walk::<S>(cfg, mu, ctx)?;
    let reports = rescaled_limit_batch::<S, _>(w.as_mut(), &pairs, &lams, &table, &series(cfg))?;
    let mut out = Outcome::new(vec!["x", "y", "k0", "slope", "last_gap", "shrinking", "converged", "passes"]);
    let mut failing = 0;
    for rep in &reports {
        if !rep.passes {
            failing += 1;
        }
        out.row(vec![
            model.format(&rep.x),
            model.format(&rep.y),
            rep.k0.render(),
            rep.slope.map_or_else(String::new, |s| s.to_string()),
            rep.gaps.last().map_or_else(String::new, |(_, g)| g.render()),
            rep.shrinking.to_string(),
            rep.converged.to_string(),
            rep.passes.to_string(),
        ]);
    }
    if failing > 0 {
        out.flag(Status::NonConverged);
    }
    out.summary = json!({ "pairs": reports.len(), "failing": failing, "lambdas": lams.iter().map(S::render).collect::<Vec<_>>() });
    Ok(out)
}

fn harmonic<S: Scalar>(ctx: &S::Context, cfg: &RunConfig, mu: &Measure, a: &HarmonicArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&a.input)?;
    let tol = cfg.truncation.tol;
    let r = cfg.truncation.ball_radius;
    let mut out = Outcome::new(vec!["kind", "checked", "max_residual", "argmax", "exact"]);
    let (kind, report, extra) = match a.kind {
        Kind::T => {
            let h = BallFunction::<S>::from_csv(mu.model(), ctx, &text)?;
            let t = lambda::<S>(ctx, &a.t)?;
            ("t", check_t_harmonic(&h, mu, &t, ctx)?, Value::Null)
        }
        Kind::Infinity => {
            let h = BallFunction::<S>::from_csv(mu.model(), ctx, &text)?;
            let table = WordNormTable::new(mu, r);
            ("infinity", check_infinity_harmonic(&h, mu, &table, ctx)?, Value::Null)
        }
        Kind::SpaceTime => {
            let domain = SpaceTimeDomain::new(mu, r, cfg.truncation.max_level)?;
            let f = SpaceTimeFunction::<S>::from_csv(&domain, ctx, &text)?;
            let rec = minimality_recursion_check(&f, ctx);
            ("space-time", check_space_time_harmonic(&f, mu, ctx)?, json!({ "recursion": report_json(&rec) }))
        }
    };
    out.flag(residual_status(&report, tol));
    out.row(vec![
        kind.into(),
        report.checked.to_string(),
        report.max_residual.render(),
        report.argmax.clone().unwrap_or_default(),
        report.exact.to_string(),
    ]);
    out.summary = json!({ "kind": kind, "residual": report_json(&report), "extra": extra });
    Ok(out)
}

fn example(cfg: &RunConfig, a: &ExampleArgs) -> Result<Outcome, CliError> {
    let alpha = cfg.alpha()?;
    let r = cfg.truncation.ball_radius;
    let ex = F2C2::new(alpha.clone(), (r + 1).max(a.n as u32 + 2))?;
    let mut w = power_cache::<BigRational>(cfg, ex.measure(), &())?;
    let checks = ex.verify(&mut w, a.n, r)?;
    let kernels: Vec<_> = Limit::ALL
        .iter()
        .map(|&l| ex.kernel_function(&mut w, l, a.n, r))
        .collect::<Result<_, _>>()?;
    let mut out = Outcome::new(vec!["x", "norm", "h0", "h1", "h2", "k0_y0", "k0_y1", "k0_y2"]);
    let model = ex.model();
    for x in ex.table().ball(r) {
        let mut row = vec![model.format(x), ex.table().norm(x).unwrap_or_default().to_string()];
        row.extend(Limit::ALL.iter().map(|&l| ex.closed_form(l, x).render()));
        row.extend(kernels.iter().map(|k| k.get(x).map(|v| v.render()).unwrap_or_default()));
        out.row(row);
    }
    if checks.iter().any(|c| !c.passed) {
        out.flag(Status::Violation);
    }
    out.summary = json!({
        "alpha": alpha.render(),
        "step_weight": ex.step_weight().render(),
        "n": a.n,
        "ball_radius": r,
        "sequences": Limit::ALL.iter().map(|&l| json!({ l.name(): model.format(&ex.sequence(l, a.n)) })).collect::<Vec<_>>(),
        "checks": checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
        "h2_not_minimal": checks.iter().all(|c| c.passed),
    });
    Ok(out)
}

fn radius_estimate(w: &mut dyn Transitions<BigRational>, cfg: &RunConfig, given: Option<f64>) -> Result<f64, CliError> {
    match given {
        Some(r) if r > 0.0 && r.is_finite() => Ok(r),
        Some(r) => Err(CliError::Config(format!("r_est must be positive, got {r}"))),
        None => Ok(spectral_radius::<BigRational, _>(w, cfg.truncation.max_level.max(2))?.radius()),
    }
}

fn peaking(cfg: &RunConfig, mu: &Measure, a: &PeakingArgs) -> Result<Outcome, CliError> {
    let model = mu.model();
    let t = &cfg.truncation;
    let mut w = make_walk::<BigRational>(cfg, mu, &())?;
    let r_est = radius_estimate(w.as_mut(), cfg, a.r_est)?;
    let opts = PeakingOptions {
        candidates: (1..=t.n_max).collect(),
        z_radius: t.ball_radius,
        max_level: t.max_level,
        r_est,
    };
    let report = peaking_experiment(w.as_mut(), &opts)?;
    let check_n = report.first_passing.unwrap_or(1);
    let level = a.identity_level.min(t.max_level);
    let diag = diagonal_identity_check(w.as_mut(), check_n, t.ball_radius.min(level as u32), level)?;
    let mut out = Outcome::new(vec![
        "n", "lower_bound", "truncated_sup", "argsup_z", "argsup_m", "boundary_term", "quotient_bound", "verdict",
    ]);
    for row in &report.rows {
        let (z, m) = row.argsup.clone().map_or((String::new(), String::new()), |(z, m)| (z, m.to_string()));
        out.row(vec![
            row.n.to_string(),
            row.lower_bound.render(),
            row.truncated_sup.render(),
            z,
            m,
            row.boundary_term.to_string(),
            row.quotient_bound.render(),
            row.verdict.to_string(),
        ]);
    }
    if report.first_passing.is_none() {
        out.flag(Status::NonConverged);
    }
    if !(diag.holds && diag.diagonal) {
        out.flag(Status::Violation);
    }
    out.summary = json!({
        "group": model.to_string(),
        "first_passing": report.first_passing,
        "z_radius": report.z_radius,
        "max_level": report.max_level,
        "r_est": report.r_est,
        "caveat": report.caveat,
        "lower_bound_certified_on": "e^(0)_(e,e)",
        "diagonal_identity": {
            "n": diag.n, "level": level, "targets": diag.targets,
            "entries": diag.entries_checked, "diagonal": diag.diagonal,
            "holds": diag.holds, "mismatch": diag.mismatch,
        },
    });
    Ok(out)
}

fn quotient(cfg: &RunConfig, mu: &Measure, a: &QuotientArgs) -> Result<Outcome, CliError> {
    let t = &cfg.truncation;
    let mut w = make_walk::<BigRational>(cfg, mu, &())?;
    let r_est = radius_estimate(w.as_mut(), cfg, a.r_est)?;
    let q = quotient_norm_upper_bound(w.as_mut(), a.n, t.ball_radius, t.max_level, r_est)?;
    let inv_return = w.prob(&mu.model().identity(), a.n)?.recip();
    let mut out = Outcome::new(vec!["n", "bound", "argmax_z", "argmax_m", "boundary_term", "inverse_return"]);
    let (z, m) = q.argmax.clone().map_or((String::new(), String::new()), |(z, m)| (z, m.to_string()));
    out.row(vec![
        a.n.to_string(),
        q.bound.render(),
        z,
        m,
        q.boundary_term.to_string(),
        inv_return.render(),
    ]);
    out.summary = json!({
        "n": a.n,
        "bound": q.bound.render(),
        "below_inverse_return": q.bound < inv_return,
        "boundary_term": q.boundary_term,
        "note": "upper bound over the truncated region only",
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// selftest

struct Suite {
    out: Outcome,
}

impl Suite {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        if !passed {
            self.out.flag(Status::Violation);
        }
        self.out.row(vec![name.into(), if passed { "pass" } else { "fail" }.into(), detail]);
    }
}

fn selftest(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut s = Suite { out: Outcome::new(vec!["check", "status", "detail"]) };
    let half = ratio(1, 2);
    let z1 = Measure::lazy_simple(GroupModel::free_abelian(1)?, half.clone())?;
    let f2 = Measure::lazy_simple(GroupModel::free(2)?, half.clone())?;
    let f2c2 = Measure::example_f2c2(half.clone())?;
    let c5 = Measure::lazy_simple(GroupModel::cyclic(5)?, half.clone())?;
    let walks = [("Z", &z1), ("F2", &f2), ("F2xC2", &f2c2), ("C5", &c5)];

    for (name, mu) in walks {
        let mut w = power_cache::<BigRational>(cfg, mu, &())?;
        let mut mass_ok = true;
        let mut ck_ok = true;
        for n in 0..=6 {
            mass_ok &= w.total_mass(n)? == ratio(1, 1);
            for k in 0..=n {
                ck_ok &= w.chapman_kolmogorov_check(k, n - k)?.exact;
            }
        }
        s.check(&format!("mass_conservation_{name}"), mass_ok, "n <= 6".into());
        s.check(&format!("chapman_kolmogorov_{name}"), ck_ok, "n + m <= 6".into());
        if name != "C5" {
            let table = WordNormTable::new(mu, 5);
            let r = w.sphere_decomposition_check(&table, 5)?;
            s.check(&format!("sphere_decomposition_{name}"), r.exact, format!("{} identities", r.checked));
        }
    }

    let simple = Measure::simple(GroupModel::free(2)?)?;
    let mut cache = power_cache::<BigRational>(cfg, &simple, &())?;
    let mut radial = RadialFreeWalk::<BigRational>::new(simple, ())?;
    let mut radial_ok = true;
    for n in 0..=8 {
        for (g, v) in cache.power(n)?.entries() {
            radial_ok &= radial.prob(g, n)? == *v;
        }
    }
    s.check("radial_oracle_F2", radial_ok, "n <= 8, every support element".into());

    let ex = F2C2::new(half.clone(), 6)?;
    let mut w = power_cache::<BigRational>(cfg, ex.measure(), &())?;
    for c in ex.verify(&mut w, 4, 3)? {
        s.check(&format!("f2c2_{}", c.name), c.passed, c.detail);
    }

    let zt = WordNormTable::new(&z1, 8);
    let pow2 = |x: &GroupElement| {
        let k: i64 = z1.model().format(x).parse().unwrap_or(0);
        if k >= 0 { ratio(1 << k, 1) } else { ratio(1, 1 << -k) }
    };
    let g = BallFunction::from_fn(z1.model(), zt.elements(), pow2);
    let r = check_t_harmonic(&g, &z1, &ratio(9, 8), &())?;
    s.check("t_harmonic_exponential_Z", r.exact, format!("{} points", r.checked));
    let domain = SpaceTimeDomain::new(&z1, 8, 8)?;
    let one = BallFunction::from_fn(z1.model(), zt.elements(), |_| ratio(1, 1));
    let mut zw = power_cache::<BigRational>(cfg, &z1, &())?;
    for (name, f) in [
        ("constant", lift_lambda(&one, &ratio(1, 1), &domain, &())?),
        ("exponential", lift_lambda(&g, &ratio(8, 9), &domain, &())?),
    ] {
        let h = check_space_time_harmonic(&f, &z1, &())?;
        s.check(&format!("space_time_harmonic_{name}"), h.exact, format!("{} points", h.checked));
        let rec = minimality_recursion_check(&f, &());
        s.check(&format!("product_recursion_{name}"), rec.exact, format!("{} identities", rec.checked));
        let dom = dominance_check(&f, &mut zw, 4)?;
        s.check(&format!("return_domination_{name}"), dom.holds(), format!("{} inequalities", dom.checked));
    }

    let e = z1.model().identity();
    let int = GroupElement::integer;
    let d = diagonal_identity_check(&mut zw, 2, 4, 6)?;
    s.check("fock_diagonal_identity_Z", d.holds && d.diagonal, format!("{} entries", d.entries_checked));
    let mut fw = RadialFreeWalk::<BigRational>::new(f2.clone(), ())?;
    let d = diagonal_identity_check(&mut fw, 1, 3, 4)?;
    s.check("fock_diagonal_identity_F2", d.holds && d.diagonal, format!("{} entries", d.entries_checked));
    let space = FockSpace::new(vec![
        enumerate_basis(&mut zw, &e, 5, BASIS_BUDGET)?,
        enumerate_basis(&mut zw, &int(1), 5, BASIS_BUDGET)?,
    ]);
    let op = build_s(&mut zw, 1, &e, &int(1), &space)?;
    s.check("fock_adjoint_involution", op.adjoint().adjoint() == op, format!("{} entries", op.nnz()));
    let t = build_t(&mut zw, 2, &e, &e, &space)?;
    let tt = t.adjoint().matmul(&t)?;
    s.check("fock_return_operator_diagonal", tt.is_diagonal(), format!("{} entries", tt.nnz()));
    let q = build_q(2, &e, &space);
    let s0 = build_s(&mut zw, 0, &e, &e, &space)?;
    s.check(
        "fock_projection_relations",
        q.matmul(&q)? == q && s0.matmul(&q)? == q && q.matmul(&build_q(3, &e, &space))?.nnz() == 0,
        "Q² = Q, S⁰Q = Q, orthogonal levels".into(),
    );
    let src = enumerate_basis(&mut zw, &e, 5, BASIS_BUDGET)?;
    let dst = enumerate_basis(&mut zw, &int(-1), 5, BASIS_BUDGET)?;
    let c = conjugate_by_unitary(&mut zw, &int(1), 1, &e, &int(1), &src, &dst, 0.0)?;
    s.check("fock_translation_conjugation", c.matches, format!("{} entries", c.compared));

    let delta = green::<BigRational, _>(&mut zw, &e, &int(1), &ratio(0, 1), &SeriesOptions::default())?;
    s.check("green_at_zero_is_delta", delta.value == ratio(0, 1), "G(0,1|0) = 0".into());

    let passed = s.out.rows.iter().filter(|r| r[1] == "pass").count();
    s.out.summary = json!({ "checks": s.out.rows.len(), "passed": passed });
    Ok(s.out)
}
