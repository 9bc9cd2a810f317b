//! Residual checks for harmonic, ∞-harmonic and space-time harmonic
//! functions on truncated domains, the lifts between them, and witnesses
//! of non-minimality.
//!
//! Nothing here claims global harmonicity: a check reports the largest
//! residual over the *interior* of the supplied domain, i.e. the points
//! whose one-step neighbourhood lies inside it. Boundary points are never
//! aggregated.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::convolution::Transitions;
use crate::group::{GroupElement, GroupError, GroupModel, WordNormTable};
use crate::kernel::{collect_values, KernelError};
use crate::measure::Measure;
use crate::report::HarmonicReport;
use crate::scalar::{parse_rational, Scalar};

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("domain is not closed: {0}")]
    NotClosed(String),
    #[error("no interior point to check")]
    EmptyInterior,
    #[error("function is not normalized: value at e is {0}")]
    NotNormalized(String),
    #[error("λ must be positive, got {0}")]
    NonPositiveLambda(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("domains differ at {0}")]
    DomainMismatch(String),
    #[error("space-time domain exceeds {0} elements per level")]
    Budget(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A function on a finite set of group elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BallFunction<S: Scalar> {
    model: GroupModel,
    order: Vec<GroupElement>,
    values: HashMap<GroupElement, S>,
    interior: Option<Vec<GroupElement>>,
}

impl<S: Scalar> BallFunction<S> {
    /// Later duplicates overwrite earlier entries.
    pub fn new(model: GroupModel, entries: Vec<(GroupElement, S)>) -> Result<Self, HarmonicError> {
        let mut order = Vec::with_capacity(entries.len());
        let mut values = HashMap::with_capacity(entries.len());
        for (g, v) in entries {
            if !model.contains(&g) {
                return Err(GroupError::ModelMismatch {
                    element: format!("{g:?}"),
                    model: model.to_string(),
                }
                .into());
            }
            if values.insert(g.clone(), v).is_none() {
                order.push(g);
            }
        }
        Ok(BallFunction {
            model,
            order,
            values,
            interior: None,
        })
    }

    pub fn from_fn(model: &GroupModel, domain: &[GroupElement], f: impl Fn(&GroupElement) -> S) -> Self {
        BallFunction {
            model: model.clone(),
            order: domain.to_vec(),
            values: domain.iter().map(|g| (g.clone(), f(g))).collect(),
            interior: None,
        }
    }

    /// Fixes the points to check; checkers then fail on missing neighbours
    /// instead of skipping the point.
    pub fn with_interior(mut self, interior: Vec<GroupElement>) -> Self {
        self.interior = Some(interior);
        self
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn domain(&self) -> &[GroupElement] {
        &self.order
    }

    pub fn get(&self, g: &GroupElement) -> Option<&S> {
        self.values.get(g)
    }

    /// Value 1 at `e`.
    pub fn is_normalized(&self, ctx: &S::Context) -> bool {
        self.get(&self.model.identity()) == Some(&S::one_with(ctx))
    }

    /// `a·self + b·other` on the common domain (in `self`'s order).
    pub fn combine(&self, a: &S, other: &Self, b: &S) -> Self {
        let order: Vec<GroupElement> = self
            .order
            .iter()
            .filter(|g| other.values.contains_key(*g))
            .cloned()
            .collect();
        let values = order
            .iter()
            .map(|g| (g.clone(), a.times(&self.values[g]).plus(&b.times(&other.values[g]))))
            .collect();
        BallFunction {
            model: self.model.clone(),
            order,
            values,
            interior: None,
        }
    }

    /// Parses `element,value` lines; blank lines, `#` comments and a header
    /// line starting with `element` are skipped. Values are `p/q`, integers
    /// or decimals (converted exactly).
    pub fn from_csv(model: &GroupModel, ctx: &S::Context, text: &str) -> Result<Self, HarmonicError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("element") {
                continue;
            }
            let parse_err = |message: String| HarmonicError::Parse { line: i + 1, message };
            let (el, val) = split_last_field(line).ok_or_else(|| parse_err("expected element,value".into()))?;
            let g = model.parse(el).map_err(|e| parse_err(e.to_string()))?;
            let q = parse_value(val).ok_or_else(|| parse_err(format!("bad value {val:?}")))?;
            entries.push((g, S::lift(ctx, &q)));
        }
        Self::new(model.clone(), entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,value\n");
        for g in &self.order {
            out.push_str(&format!("{},{}\n", csv_field(&self.model.format(g)), self.values[g].render()));
        }
        out
    }
}

/// Quotes a field containing commas.
fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

/// Splits `a,b` at the last comma, honouring one quoted leading field.
fn split_last_field(line: &str) -> Option<(&str, &str)> {
    if let Some(rest) = line.strip_prefix('"') {
        let end = rest.find('"')?;
        let tail = rest[end + 1..].strip_prefix(',')?;
        return Some((&rest[..end], tail.trim()));
    }
    let i = line.rfind(',')?;
    Some((line[..i].trim(), line[i + 1..].trim()))
}

/// Splits `a,b,c` into the leading field and the last two.
fn split_last_two(line: &str) -> Option<(&str, &str, &str)> {
    let (head, c) = split_last_field(line)?;
    let (a, b) = split_last_field(head)?;
    Some((a, b, c))
}

/// `p/q`, an integer, or a decimal such as `-1.25e-3`, as an exact rational.
pub fn parse_value(text: &str) -> Option<BigRational> {
    if let Some(q) = parse_rational(text) {
        return Some(q);
    }
    let text = text.trim();
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(d) => (true, d),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int}{frac}");
    let n: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if shift >= 0 {
        BigRational::from_integer(n * ten.pow(shift as u32))
    } else {
        BigRational::new(n, ten.pow((-shift) as u32))
    };
    if neg {
        q = -q;
    }
    Some(q)
}

fn lifted_atoms<S: Scalar>(mu: &Measure, ctx: &S::Context) -> Vec<(GroupElement, S)> {
    mu.atoms()
        .iter()
        .map(|(s, w)| (s.clone(), S::lift(ctx, w)))
        .collect()
}

fn check_model<S: Scalar>(h: &BallFunction<S>, mu: &Measure) -> Result<(), HarmonicError> {
    if h.model() != mu.model() {
        return Err(HarmonicError::DomainMismatch(format!(
            "function on {} but measure on {}",
            h.model(),
            mu.model()
        )));
    }
    Ok(())
}

/// Residuals `Σ_y μ(x⁻¹y)h(y) − t·h(x)` of `P_μ h = t·h`.
pub fn check_t_harmonic<S: Scalar>(
    h: &BallFunction<S>,
    mu: &Measure,
    t: &S,
    ctx: &S::Context,
) -> Result<HarmonicReport<S>, HarmonicError> {
    check_model(h, mu)?;
    let atoms = lifted_atoms::<S>(mu, ctx);
    let model = mu.model();
    let explicit = h.interior.is_some();
    let points = h.interior.as_deref().unwrap_or(&h.order);
    let mut report = HarmonicReport::new(ctx);
    'points: for x in points {
        let Some(hx) = h.get(x) else {
            return Err(HarmonicError::NotClosed(format!("{} has no value", model.format(x))));
        };
        let mut acc = S::zero_with(ctx);
        for (s, w) in &atoms {
            let y = model.mul(x, s)?;
            match h.get(&y) {
                Some(hy) => acc = acc.plus(&w.times(hy)),
                None if explicit => {
                    return Err(HarmonicError::NotClosed(format!(
                        "{} needs {}",
                        model.format(x),
                        model.format(&y)
                    )))
                }
                None => continue 'points,
            }
        }
        report.record(acc.minus(&t.times(hx)), || model.format(x));
    }
    nonempty(report)
}

fn nonempty<S: Scalar>(report: HarmonicReport<S>) -> Result<HarmonicReport<S>, HarmonicError> {
    if report.checked == 0 {
        Err(HarmonicError::EmptyInterior)
    } else {
        Ok(report.finish())
    }
}

/// Residuals `g(x) − Σ_y μ̄ₓ(y)g(y)` against the truncated measures.
///
/// Interior points need `|x| + 1 ≤ table.radius()` and a value at every
/// atom of `μ̄ₓ`.
pub fn check_infinity_harmonic<S: Scalar>(
    g: &BallFunction<S>,
    mu: &Measure,
    table: &WordNormTable,
    ctx: &S::Context,
) -> Result<HarmonicReport<S>, HarmonicError> {
    check_model(g, mu)?;
    let model = mu.model();
    let explicit = g.interior.is_some();
    let points = g.interior.as_deref().unwrap_or(&g.order);
    let mut report = HarmonicReport::new(ctx);
    'points: for x in points {
        let Some(gx) = g.get(x) else {
            return Err(HarmonicError::NotClosed(format!("{} has no value", model.format(x))));
        };
        let truncated = match mu.truncate_at(x, table) {
            Ok(t) => t,
            Err(e) if explicit => return Err(e.into()),
            Err(_) => continue,
        };
        let mut acc = S::zero_with(ctx);
        for (y, w) in &truncated.atoms {
            match g.get(y) {
                Some(gy) => acc = acc.plus(&S::lift(ctx, w).times(gy)),
                None if explicit => {
                    return Err(HarmonicError::NotClosed(format!(
                        "{} needs {}",
                        model.format(x),
                        model.format(y)
                    )))
                }
                None => continue 'points,
            }
        }
        report.record(gx.minus(&acc), || model.format(x));
    }
    nonempty(report)
}

// ---------------------------------------------------------------------------
// Space-time functions

/// `ST ∩ (ball × {0..=M})`: points `(x, m)` with `Pᵐ(e,x) > 0`, `|x|_μ ≤ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeDomain {
    model: GroupModel,
    radius: u32,
    max_level: u64,
    points: Vec<(GroupElement, u64)>,
    set: HashSet<(GroupElement, u64)>,
}

impl SpaceTimeDomain {
    /// Largest support tracked per level for non-lazy measures.
    pub const SUPPORT_BUDGET: usize = 5_000_000;

    /// For lazy `μ` membership is `m ≥ |x|_μ`; otherwise the supports of
    /// `μ*ᵐ` are propagated as sets.
    pub fn new(mu: &Measure, radius: u32, max_level: u64) -> Result<Self, HarmonicError> {
        let table = WordNormTable::new(mu, radius);
        let model = mu.model().clone();
        let mut points = Vec::new();
        if mu.is_lazy() {
            for m in 0..=max_level {
                let r = radius.min(u32::try_from(m).unwrap_or(u32::MAX));
                points.extend(table.ball(r).iter().map(|x| (x.clone(), m)));
            }
        } else {
            let mut support: HashSet<GroupElement> = HashSet::from([model.identity()]);
            for m in 0..=max_level {
                if m > 0 {
                    let mut next = HashSet::with_capacity(support.len() * 2);
                    for x in &support {
                        for (s, _) in mu.atoms() {
                            next.insert(model.mul(x, s)?);
                        }
                    }
                    if next.len() > Self::SUPPORT_BUDGET {
                        return Err(HarmonicError::Budget(Self::SUPPORT_BUDGET));
                    }
                    support = next;
                }
                points.extend(
                    table
                        .elements()
                        .iter()
                        .filter(|x| support.contains(*x))
                        .map(|x| (x.clone(), m)),
                );
            }
        }
        let set = points.iter().cloned().collect();
        Ok(SpaceTimeDomain {
            model,
            radius,
            max_level,
            points,
            set,
        })
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn max_level(&self) -> u64 {
        self.max_level
    }

    /// Level-major, BFS order within a level.
    pub fn points(&self) -> &[(GroupElement, u64)] {
        &self.points
    }

    pub fn contains(&self, x: &GroupElement, m: u64) -> bool {
        self.set.contains(&(x.clone(), m))
    }
}

/// A function on a truncated space-time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeFunction<S: Scalar> {
    model: GroupModel,
    max_level: u64,
    order: Vec<(GroupElement, u64)>,
    values: HashMap<(GroupElement, u64), S>,
}

impl<S: Scalar> SpaceTimeFunction<S> {
    /// `f` on every domain point where it returns a value.
    pub fn from_fn(domain: &SpaceTimeDomain, f: impl Fn(&GroupElement, u64) -> Option<S>) -> Self {
        let mut order = Vec::with_capacity(domain.points.len());
        let mut values = HashMap::with_capacity(domain.points.len());
        for (x, m) in &domain.points {
            if let Some(v) = f(x, *m) {
                order.push((x.clone(), *m));
                values.insert((x.clone(), *m), v);
            }
        }
        SpaceTimeFunction {
            model: domain.model.clone(),
            max_level: domain.max_level,
            order,
            values,
        }
    }

    /// Parses `element,level,value` lines; every point must lie in `domain`.
    pub fn from_csv(domain: &SpaceTimeDomain, ctx: &S::Context, text: &str) -> Result<Self, HarmonicError> {
        let mut given: HashMap<(GroupElement, u64), S> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("element") {
                continue;
            }
            let parse_err = |message: String| HarmonicError::Parse { line: i + 1, message };
            let (el, level, val) =
                split_last_two(line).ok_or_else(|| parse_err("expected element,level,value".into()))?;
            let g = domain.model.parse(el).map_err(|e| parse_err(e.to_string()))?;
            let m: u64 = level.parse().map_err(|_| parse_err(format!("bad level {level:?}")))?;
            if !domain.contains(&g, m) {
                return Err(parse_err(format!("({el}, {m}) is outside the space-time domain")));
            }
            let q = parse_value(val).ok_or_else(|| parse_err(format!("bad value {val:?}")))?;
            given.insert((g, m), S::lift(ctx, &q));
        }
        Ok(Self::from_fn(domain, |x, m| given.get(&(x.clone(), m)).cloned()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,level,value\n");
        for (x, m) in &self.order {
            let v = &self.values[&(x.clone(), *m)];
            out.push_str(&format!("{},{m},{}\n", csv_field(&self.model.format(x)), v.render()));
        }
        out
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn max_level(&self) -> u64 {
        self.max_level
    }

    pub fn points(&self) -> &[(GroupElement, u64)] {
        &self.order
    }

    pub fn get(&self, x: &GroupElement, m: u64) -> Option<&S> {
        self.values.get(&(x.clone(), m))
    }

    /// `a·self + b·other` on the common domain.
    pub fn combine(&self, a: &S, other: &Self, b: &S) -> Self {
        let order: Vec<_> = self
            .order
            .iter()
            .filter(|p| other.values.contains_key(*p))
            .cloned()
            .collect();
        let values = order
            .iter()
            .map(|p| (p.clone(), a.times(&self.values[p]).plus(&b.times(&other.values[p]))))
            .collect();
        SpaceTimeFunction {
            model: self.model.clone(),
            max_level: self.max_level,
            order,
            values,
        }
    }
}

/// Residuals `f((x,m)) − Σ_y μ(x⁻¹y) f((y,m+1))` of `P_ST f = f` over the
/// interior: levels `m < M` whose successors all carry values.
pub fn check_space_time_harmonic<S: Scalar>(
    f: &SpaceTimeFunction<S>,
    mu: &Measure,
    ctx: &S::Context,
) -> Result<HarmonicReport<S>, HarmonicError> {
    if f.model() != mu.model() {
        return Err(HarmonicError::DomainMismatch("function and measure live on different groups".into()));
    }
    let atoms = lifted_atoms::<S>(mu, ctx);
    let model = mu.model();
    let mut report = HarmonicReport::new(ctx);
    'points: for (x, m) in &f.order {
        if *m >= f.max_level {
            continue;
        }
        let mut acc = S::zero_with(ctx);
        for (s, w) in &atoms {
            let y = model.mul(x, s)?;
            match f.get(&y, m + 1) {
                Some(v) => acc = acc.plus(&w.times(v)),
                None => continue 'points,
            }
        }
        let fx = &f.values[&(x.clone(), *m)];
        report.record(fx.minus(&acc), || format!("({}, {m})", model.format(x)));
    }
    nonempty(report)
}

/// `f((x,m)) = λᵐ g(x)`. If `P_μ g = λ⁻¹g` exactly, `f` is exactly space-time harmonic.
pub fn lift_lambda<S: Scalar>(
    g: &BallFunction<S>,
    lambda: &S,
    domain: &SpaceTimeDomain,
    ctx: &S::Context,
) -> Result<SpaceTimeFunction<S>, HarmonicError> {
    if !lambda.is_positive_value() {
        return Err(HarmonicError::NonPositiveLambda(lambda.render()));
    }
    require_normalized(g, ctx)?;
    let mut powers: Vec<S> = vec![S::one_with(ctx)];
    for m in 1..=domain.max_level as usize {
        let next = powers[m - 1].times(lambda);
        powers.push(next);
    }
    Ok(SpaceTimeFunction::from_fn(domain, |x, m| {
        g.get(x).map(|v| powers[m as usize].times(v))
    }))
}

/// `f((x,m)) = 1_{m = |x|_μ} g(x)`. If `g` is exactly ∞-harmonic, `f` is
/// exactly space-time harmonic.
pub fn lift_zero<S: Scalar>(
    g: &BallFunction<S>,
    table: &WordNormTable,
    domain: &SpaceTimeDomain,
    ctx: &S::Context,
) -> Result<SpaceTimeFunction<S>, HarmonicError> {
    require_normalized(g, ctx)?;
    Ok(SpaceTimeFunction::from_fn(domain, |x, m| {
        let norm = table.norm(x)?;
        if u64::from(norm) == m {
            g.get(x).cloned()
        } else {
            Some(S::zero_with(ctx))
        }
    }))
}

fn require_normalized<S: Scalar>(g: &BallFunction<S>, ctx: &S::Context) -> Result<(), HarmonicError> {
    if g.is_normalized(ctx) {
        Ok(())
    } else {
        let at_e = g
            .get(&g.model().identity())
            .map_or_else(|| "undefined".to_string(), S::render);
        Err(HarmonicError::NotNormalized(at_e))
    }
}

/// Residuals of `f((x,m+n)) = f((e,n))·f((x,m))` wherever all three points
/// carry values, `n ≥ 1`. Minimal functions pass; a nonzero residual
/// certifies non-minimality.
pub fn minimality_recursion_check<S: Scalar>(
    f: &SpaceTimeFunction<S>,
    ctx: &S::Context,
) -> HarmonicReport<S> {
    let e = f.model.identity();
    let mut report = HarmonicReport::new(ctx);
    for (x, m) in &f.order {
        let fx = &f.values[&(x.clone(), *m)];
        for n in 1..=f.max_level.saturating_sub(*m) {
            let (Some(fe), Some(far)) = (f.get(&e, n), f.get(x, m + n)) else {
                continue;
            };
            report.record(far.minus(&fe.times(fx)), || {
                format!("({}, {m}) n={n}", f.model.format(x))
            });
        }
    }
    report.finish()
}

/// Outcome of the inequality `f((x,m)) ≥ Pⁿ(e,e)·f((x,m+n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport<S: Scalar> {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `f((x,m)) − Pⁿ(e,e)f((x,m+n))` seen.
    pub min_slack: Option<S>,
    pub argmin: Option<String>,
}

impl<S: Scalar> DominanceReport<S> {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }
}

/// Checks `f((x,m)) ≥ Pⁿ(e,e)·f((x,m+n))` for `1 ≤ n ≤ n_max` on the domain.
pub fn dominance_check<S, T>(
    f: &SpaceTimeFunction<S>,
    walk: &mut T,
    n_max: u64,
) -> Result<DominanceReport<S>, HarmonicError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let e = walk.measure().model().identity();
    let requests: Vec<_> = (0..=n_max).map(|n| (e.clone(), n)).collect();
    let returns = collect_values::<S, T>(walk, &requests)?;
    let mut report = DominanceReport {
        checked: 0,
        violations: 0,
        min_slack: None,
        argmin: None,
    };
    for (x, m) in &f.order {
        let fx = &f.values[&(x.clone(), *m)];
        for (n, p) in returns.iter().enumerate().skip(1) {
            let Some(far) = f.get(x, m + n as u64) else {
                continue;
            };
            let slack = fx.minus(&p.times(far));
            report.checked += 1;
            if !slack.is_positive_value() && !slack.is_zero_value() {
                report.violations += 1;
            }
            if report.min_slack.as_ref().map_or(true, |s| slack < *s) {
                report.argmin = Some(format!("({}, {m}) n={n}", f.model.format(x)));
                report.min_slack = Some(slack);
            }
        }
    }
    Ok(report)
}

/// Result of testing `h₂ = ½(h₀ + h₁)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonMinimalWitness {
    /// The decomposition holds on the common domain.
    pub holds: bool,
    /// `h₀` and `h₁` are proportional, so the decomposition proves nothing.
    pub degenerate: bool,
    /// `holds` and not `degenerate`: `h₂` dominates `½h₀` with `h₀` not proportional to `h₂`.
    pub non_minimal: bool,
    /// First point where the decomposition fails.
    pub mismatch: Option<String>,
    pub checked: usize,
}

/// Tests `h₂(x) = ½(h₀(x) + h₁(x))` on the common domain: exactly in
/// rational mode, to relative `tol` in float mode.
pub fn witness_nonminimal<S: Scalar>(
    h2: &BallFunction<S>,
    h0: &BallFunction<S>,
    h1: &BallFunction<S>,
    tol: f64,
    ctx: &S::Context,
) -> NonMinimalWitness {
    let half = S::lift(ctx, &BigRational::new(BigInt::one(), BigInt::from(2)));
    let close = |a: &S, b: &S| {
        if S::EXACT {
            a == b
        } else {
            let scale = a.abs_value().as_f64().max(b.abs_value().as_f64()).max(1.0);
            a.minus(b).abs_value().as_f64() <= tol * scale
        }
    };
    let mut holds = true;
    let mut mismatch = None;
    let mut checked = 0;
    for x in &h2.order {
        let (Some(a), Some(b), Some(c)) = (h0.get(x), h1.get(x), h2.get(x)) else {
            continue;
        };
        checked += 1;
        if !close(c, &half.times(&a.plus(b))) {
            holds = false;
            mismatch = Some(h2.model.format(x));
            break;
        }
    }
    let degenerate = proportional(h0, h1, &close);
    NonMinimalWitness {
        holds: holds && checked > 0,
        degenerate,
        non_minimal: holds && checked > 0 && !degenerate,
        mismatch,
        checked,
    }
}

/// `a = c·b` on the common domain for some scalar `c`.
fn proportional<S: Scalar>(a: &BallFunction<S>, b: &BallFunction<S>, close: &dyn Fn(&S, &S) -> bool) -> bool {
    let common: Vec<&GroupElement> = a.order.iter().filter(|x| b.values.contains_key(*x)).collect();
    let Some(pivot) = common.iter().find(|x| !b.values[**x].is_zero_value()) else {
        return common.iter().all(|x| a.values[*x].is_zero_value());
    };
    let c = a.values[*pivot].divide(&b.values[*pivot]).expect("nonzero pivot");
    common
        .iter()
        .all(|x| close(&a.values[*x], &c.times(&b.values[*x])))
}
