//! Kernels built from transition probabilities.
//!
//! * λ-Green functions `G(x,y|λ) = Σ λⁿPⁿ(x,y)` and λ-Martin kernels
//!   `K(x,y|λ) = G(x,y|λ)/G(e,y|λ)`, with the Martin distance `d_{M,λ}`;
//! * spectral radius estimates and Gerl ratios `P^{k+1}/P^k`;
//! * ratio-limit kernels `H(x,y) = lim Pⁿ(x,y)/Pⁿ(e,y)` and the radical test;
//! * space-time kernels `K_ST((x,m),(y,n)) = P^{n−m}(x,y)/Pⁿ(e,y)` and the
//!   embedding `h_y(x,m) = RᵐH(x,y)`;
//! * the 0-Martin kernel `K₀` and the rescaled limit `λ^{|x|}K(x,y|λ) → K₀(x,y)`.
//!
//! The base point is always `e`. Every batch function runs one streaming
//! sweep over the distinct targets `x⁻¹y`, deduplicated through
//! [`Transitions::orbit_key`].

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::ops::ControlFlow;

use num_rational::BigRational;
use thiserror::Error;

use crate::convolution::{ConvolutionError, Transitions};
use crate::group::{GroupElement, GroupError, WordNormTable};
use crate::scalar::{Mode, Scalar};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("λ must be non-negative, got {0}")]
    NegativeLambda(String),
    #[error("λ must be positive for a Martin kernel, got {0}")]
    NonPositiveLambda(String),
    #[error("λ = {lambda} is not below the radius estimate {radius}")]
    AboveRadius { lambda: String, radius: f64 },
    #[error("λ sequence must be strictly {0}")]
    BadSequence(&'static str),
    #[error("eps must be positive and finite")]
    BadEps,
    #[error("measure is not lazy; set the override to proceed")]
    NotLazy,
    #[error("{0} is not in the space-time set")]
    NotInSpaceTime(String),
    #[error("G(e,y|λ) vanishes for y = {0}: the measure does not reach it")]
    Unreachable(String),
    #[error("every return probability vanishes up to n = {0}")]
    NoReturns(u64),
    #[error("{0}")]
    Input(String),
}

/// A kernel value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelResult<S: Scalar> {
    pub value: S,
    pub mode: Mode,
    /// Truncation index (series length or largest power used).
    pub truncation: u64,
    /// Estimated absolute error left in `value`.
    pub tail_estimate: f64,
    pub converged: bool,
}

/// Stopping rule for Green series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub eps: f64,
    pub k_max: u64,
    /// Radius estimate `R`; Martin kernels reject `λ ≥ R` when set.
    pub radius: Option<f64>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            eps: 1e-12,
            k_max: 10_000,
            radius: None,
        }
    }
}

impl SeriesOptions {
    fn check(&self) -> Result<(), KernelError> {
        if self.eps > 0.0 && self.eps.is_finite() {
            Ok(())
        } else {
            Err(KernelError::BadEps)
        }
    }
}

/// Number of trailing terms that must all be small before a series stops.
pub const SERIES_WINDOW: usize = 10;

/// Length of the Cauchy window used for ratio sequences.
pub const CAUCHY_WINDOW: usize = 8;

/// Distinct sweep targets, keyed by orbit.
struct Targets {
    keys: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
}

impl Targets {
    fn new() -> Self {
        Targets {
            keys: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn add<S: Scalar, T: Transitions<S> + ?Sized>(&mut self, walk: &T, g: &GroupElement) -> usize {
        let key = walk.orbit_key(g);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.keys.push(key.clone());
        self.index.insert(key, self.keys.len() - 1);
        self.keys.len() - 1
    }
}

/// `μ*ⁿ(g)` for every request `(g, n)`, from a single sweep.
pub fn collect_values<S, T>(
    walk: &mut T,
    requests: &[(GroupElement, u64)],
) -> Result<Vec<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let mut targets = Targets::new();
    let mut by_level: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for (r, (g, n)) in requests.iter().enumerate() {
        if !walk.measure().model().contains(g) {
            return Err(GroupError::ModelMismatch {
                element: format!("{g:?}"),
                model: walk.measure().model().to_string(),
            }
            .into());
        }
        let t = targets.add(walk, g);
        by_level.entry(*n).or_default().push((r, t));
    }
    let mut out = vec![S::zero_with(walk.context()); requests.len()];
    let Some(&n_max) = by_level.keys().next_back() else {
        return Ok(out);
    };
    walk.sweep(&targets.keys, n_max, &mut |n, probe| {
        if let Some(reqs) = by_level.get(&n) {
            for &(r, t) in reqs {
                out[r] = probe(t);
            }
        }
        if n >= n_max {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Green and Martin kernels

#[derive(Debug, Clone)]
struct SeriesState {
    first_positive: Option<u64>,
    window: VecDeque<f64>,
    sum_f: f64,
}

impl SeriesState {
    fn new() -> Self {
        SeriesState {
            first_positive: None,
            window: VecDeque::with_capacity(SERIES_WINDOW + 1),
            sum_f: 0.0,
        }
    }

    fn push(&mut self, n: u64, prob_positive: bool, term: f64) {
        if prob_positive && self.first_positive.is_none() {
            self.first_positive = Some(n);
        }
        self.sum_f += term;
        self.window.push_back(term);
        if self.window.len() > SERIES_WINDOW {
            self.window.pop_front();
        }
    }

    /// `K ≥ 2|g|_μ`, the last window of terms each `< eps·sum`, last term `< eps`.
    fn satisfied(&self, n: u64, eps: f64) -> bool {
        let Some(p) = self.first_positive else {
            return false;
        };
        n >= 2 * p
            && self.window.len() == SERIES_WINDOW
            && self.window.iter().all(|&t| t < eps * self.sum_f)
            && self.window.back().is_some_and(|&t| t < eps)
    }

    /// Geometric tail bound from pairs of terms (robust to period 2).
    fn tail(&self) -> f64 {
        let w: Vec<f64> = self.window.iter().copied().collect();
        let k = w.len();
        if k < 4 {
            return f64::INFINITY;
        }
        let a = w[k - 1] + w[k - 2];
        let b = w[k - 3] + w[k - 4];
        if a == 0.0 {
            return 0.0;
        }
        let r = a / b;
        if b > 0.0 && r < 1.0 {
            a * r / (1.0 - r)
        } else {
            f64::INFINITY
        }
    }
}

struct GreenSums<S> {
    sums: Vec<S>,
    truncation: u64,
    satisfied: Vec<bool>,
    tails: Vec<f64>,
}

struct GreenRun<S> {
    lambda: S,
    lam_pow: S,
    sums: Vec<S>,
    states: Vec<SeriesState>,
    satisfied: Vec<bool>,
    truncation: u64,
    finished: bool,
}

/// Partial sums `Σ_{n≤K} λⁿμ*ⁿ(key)` for every `λ` from one sweep. For each
/// `λ` all keys share one `K`: the first index at which every key meets the
/// stopping rule, or `k_max`.
fn green_sums<S, T>(
    walk: &mut T,
    keys: &[GroupElement],
    lambdas: &[S],
    opts: &SeriesOptions,
) -> Result<Vec<GreenSums<S>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    opts.check()?;
    let ctx = walk.context().clone();
    let e = walk.measure().model().identity();
    let mut runs = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        if !lambda.is_positive_value() && !lambda.is_zero_value() {
            return Err(KernelError::NegativeLambda(lambda.render()));
        }
        let zero = lambda.is_zero_value();
        runs.push(GreenRun {
            lambda: lambda.clone(),
            lam_pow: S::one_with(&ctx),
            // G(·|0) is the Kronecker delta.
            sums: keys
                .iter()
                .map(|k| {
                    if zero && *k == e {
                        S::one_with(&ctx)
                    } else {
                        S::zero_with(&ctx)
                    }
                })
                .collect(),
            states: vec![SeriesState::new(); keys.len()],
            satisfied: vec![zero; keys.len()],
            truncation: 0,
            finished: zero,
        });
    }
    if runs.iter().any(|r| !r.finished) {
        walk.sweep(keys, opts.k_max, &mut |n, probe| {
            let probs: Vec<S> = (0..keys.len()).map(probe).collect();
            for run in runs.iter_mut().filter(|r| !r.finished) {
                if n > 0 {
                    run.lam_pow = run.lam_pow.times(&run.lambda);
                }
                run.truncation = n;
                let mut all = true;
                for (i, p) in probs.iter().enumerate() {
                    let positive = p.is_positive_value();
                    let term = if positive { run.lam_pow.times(p) } else { S::zero_with(&ctx) };
                    run.sums[i] = run.sums[i].plus(&term);
                    run.states[i].push(n, positive, term.as_f64());
                    run.satisfied[i] = run.states[i].satisfied(n, opts.eps);
                    all &= run.satisfied[i];
                }
                run.finished = all;
            }
            if runs.iter().all(|r| r.finished) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
    }
    Ok(runs
        .into_iter()
        .map(|r| GreenSums {
            tails: if r.lambda.is_zero_value() {
                vec![0.0; keys.len()]
            } else {
                r.states.iter().map(SeriesState::tail).collect()
            },
            sums: r.sums,
            truncation: r.truncation,
            satisfied: r.satisfied,
        })
        .collect())
}

/// `G(x,y|λ)` by truncated series.
pub fn green<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    lambda: &S,
    opts: &SeriesOptions,
) -> Result<KernelResult<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(green_batch(walk, &[(x.clone(), y.clone())], lambda, opts)?.remove(0))
}

/// `G(x,y|λ)` for many pairs, sharing one truncation index.
pub fn green_batch<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    lambda: &S,
    opts: &SeriesOptions,
) -> Result<Vec<KernelResult<S>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let mut targets = Targets::new();
    let mut idx = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let g = walk.measure().model().between(x, y)?;
        idx.push(targets.add(walk, &g));
    }
    let g = green_sums(walk, &targets.keys, std::slice::from_ref(lambda), opts)?.remove(0);
    let mode = S::mode(walk.context());
    Ok(idx
        .into_iter()
        .map(|i| KernelResult {
            value: g.sums[i].clone(),
            mode,
            truncation: g.truncation,
            tail_estimate: g.tails[i],
            converged: g.satisfied[i],
        })
        .collect())
}

fn check_martin_lambda<S: Scalar>(lambda: &S, opts: &SeriesOptions) -> Result<(), KernelError> {
    if !lambda.is_positive_value() {
        return Err(KernelError::NonPositiveLambda(lambda.render()));
    }
    if let Some(radius) = opts.radius {
        if lambda.as_f64() >= radius {
            return Err(KernelError::AboveRadius {
                lambda: lambda.render(),
                radius,
            });
        }
    }
    Ok(())
}

/// `K(x,y|λ) = G(x,y|λ)/G(e,y|λ)` with a shared truncation index.
pub fn martin_kernel<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    lambda: &S,
    opts: &SeriesOptions,
) -> Result<KernelResult<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(martin_batch(walk, &[(x.clone(), y.clone())], lambda, opts)?.remove(0))
}

/// [`martin_kernel`] for many pairs; all numerators and denominators come
/// from one series run and share its truncation index.
pub fn martin_batch<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    lambda: &S,
    opts: &SeriesOptions,
) -> Result<Vec<KernelResult<S>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(martin_grid(walk, pairs, std::slice::from_ref(lambda), opts)?.remove(0))
}

/// [`martin_batch`] for several `λ` at once, from a single sweep; the
/// outer index is the `λ`.
pub fn martin_grid<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    lambdas: &[S],
    opts: &SeriesOptions,
) -> Result<Vec<Vec<KernelResult<S>>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    for lambda in lambdas {
        check_martin_lambda(lambda, opts)?;
    }
    let model = walk.measure().model().clone();
    let e = model.identity();
    let mut targets = Targets::new();
    let mut idx = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let g = model.between(x, y)?;
        idx.push((targets.add(walk, &g), targets.add(walk, y)));
    }
    let runs = green_sums(walk, &targets.keys, lambdas, opts)?;
    let ctx = walk.context().clone();
    let mode = S::mode(&ctx);
    let mut grid = Vec::with_capacity(lambdas.len());
    for g in runs {
        let mut out = Vec::with_capacity(pairs.len());
        for ((x, y), &(i, j)) in pairs.iter().zip(&idx) {
            let den = &g.sums[j];
            if den.is_zero_value() {
                return Err(KernelError::Unreachable(model.format(y)));
            }
            let value = if *x == e {
                S::one_with(&ctx)
            } else {
                g.sums[i].divide(den).expect("nonzero denominator")
            };
            let rel = |k: usize| g.tails[k] / g.sums[k].as_f64().abs().max(f64::MIN_POSITIVE);
            let tail = if *x == e {
                0.0
            } else if g.sums[i].is_zero_value() {
                g.tails[i] / den.as_f64()
            } else {
                value.as_f64().abs() * (rel(i) + rel(j))
            };
            out.push(KernelResult {
                value,
                mode,
                truncation: g.truncation,
                tail_estimate: tail,
                converged: g.satisfied[i] && g.satisfied[j],
            });
        }
        grid.push(out);
    }
    Ok(grid)
}

/// `K(x,y|R)` as the limit of `K(x,y|λ_k)` along `λ_k ↗ R`.
///
/// The values (their logarithms, when all are positive) are extrapolated
/// to `s = 0` in `s = √(R − λ)` with Neville's scheme. `converged` needs every `K(x,y|λ_k)` converged and the last two
/// extrapolants within `tol`.
pub fn martin_kernel_at_r<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    lambdas: &[S],
    radius: f64,
    tol: f64,
    opts: &SeriesOptions,
) -> Result<KernelResult<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    if lambdas.is_empty() {
        return Err(KernelError::Input("empty λ sequence".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KernelError::BadSequence("increasing"));
    }
    for l in lambdas {
        if l.as_f64() >= radius {
            return Err(KernelError::AboveRadius {
                lambda: l.render(),
                radius,
            });
        }
    }
    let inner = SeriesOptions {
        radius: Some(radius),
        ..*opts
    };
    let ctx = walk.context().clone();
    let mode = S::mode(&ctx);
    let grid = martin_grid(walk, &[(x.clone(), y.clone())], lambdas, &inner)?;
    let mut s = Vec::with_capacity(lambdas.len());
    let mut k = Vec::with_capacity(lambdas.len());
    let mut converged = true;
    let mut truncation = 0;
    for (l, row) in lambdas.iter().zip(grid) {
        let r = &row[0];
        converged &= r.converged;
        truncation = truncation.max(r.truncation);
        s.push((radius - l.as_f64()).sqrt());
        k.push(r.value.as_f64());
    }
    if *x == walk.measure().model().identity() {
        return Ok(KernelResult {
            value: S::one_with(&ctx),
            mode,
            truncation,
            tail_estimate: 0.0,
            converged,
        });
    }
    // Positive kernels are extrapolated on the log scale, where the
    // dependence on s is much closer to polynomial.
    let positive = k.iter().all(|&v| v > 0.0);
    let estimates: Vec<f64> = if positive {
        let logs: Vec<f64> = k.iter().map(|v| v.ln()).collect();
        neville_at_zero(&s, &logs).into_iter().map(f64::exp).collect()
    } else {
        neville_at_zero(&s, &k)
    };
    let last = *estimates.last().expect("non-empty");
    let change = match estimates.len() {
        1 => f64::INFINITY,
        n => (last - estimates[n - 2]).abs(),
    };
    Ok(KernelResult {
        value: lift_f64(&ctx, last),
        mode,
        truncation,
        tail_estimate: change,
        converged: converged && change <= tol,
    })
}

/// Successive Neville extrapolants `p_{0..k}(0)`, `k = 0, 1, …`.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut out = vec![ys[0]];
    // After round r, p[i] interpolates points i-r..=i.
    for r in 1..n {
        for i in (r..n).rev() {
            let (xa, xb) = (xs[i - r], xs[i]);
            p[i] = (xb * p[i - 1] - xa * p[i]) / (xb - xa);
        }
        out.push(p[r]);
    }
    out
}

fn lift_f64<S: Scalar>(ctx: &S::Context, v: f64) -> S {
    match BigRational::from_float(v) {
        Some(q) => S::lift(ctx, &q),
        None => S::zero_with(ctx),
    }
}

/// Truncated Martin distance over the ball of `table`:
/// `Σ_x α(x)(|K(x,y₁|λ) − K(x,y₂|λ)| + |δ_x(y₁) − δ_x(y₂)|)/(C_x + 1)`
/// with `α(x) = 2^{−BFS index of x}` and `C_x = 1/(λ^{|x|}P^{|x|}(e,x))`.
pub fn martin_distance<S, T>(
    walk: &mut T,
    y1: &GroupElement,
    y2: &GroupElement,
    lambda: &S,
    table: &WordNormTable,
    opts: &SeriesOptions,
) -> Result<KernelResult<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    for y in [y1, y2] {
        if table.norm(y).is_none() {
            return Err(GroupError::OutOfRadius {
                element: table.model().format(y),
                radius: table.radius(),
            }
            .into());
        }
    }
    let ctx = walk.context().clone();
    let xs = table.elements();
    let mut pairs = Vec::with_capacity(2 * xs.len());
    for x in xs {
        pairs.push((x.clone(), y1.clone()));
        pairs.push((x.clone(), y2.clone()));
    }
    let ks = martin_batch(walk, &pairs, lambda, opts)?;
    let requests: Vec<(GroupElement, u64)> = xs
        .iter()
        .map(|x| (x.clone(), u64::from(table.norm(x).expect("in table"))))
        .collect();
    let p = collect_values::<S, T>(walk, &requests)?;
    let one = S::one_with(&ctx);
    let half = S::lift(&ctx, &crate::scalar::ratio(1, 2));
    let mut alpha = S::one_with(&ctx);
    let mut sum = S::zero_with(&ctx);
    let mut converged = true;
    let mut tail = 0.0;
    let mut truncation = 0;
    for (i, x) in xs.iter().enumerate() {
        debug_assert_eq!(table.bfs_index(x), Some(i));
        let (k1, k2) = (&ks[2 * i], &ks[2 * i + 1]);
        converged &= k1.converged && k2.converged;
        truncation = truncation.max(k1.truncation);
        let mut diff = k1.value.minus(&k2.value).abs_value();
        if (x == y1) != (x == y2) {
            diff = diff.plus(&one);
        }
        // 1/(C_x + 1) = w/(1 + w) with w = λ^{|x|}P^{|x|}(e,x).
        let w = lambda.pow_with(&ctx, requests[i].1).times(&p[i]);
        let factor = w.divide(&one.plus(&w)).expect("1 + w > 0");
        let a = alpha.times(&factor).as_f64();
        tail += a * (k1.tail_estimate + k2.tail_estimate);
        sum = sum.plus(&alpha.times(&diff).times(&factor));
        alpha = alpha.times(&half);
    }
    Ok(KernelResult {
        value: sum,
        mode: S::mode(&ctx),
        truncation,
        tail_estimate: tail,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Spectral radius and Gerl ratios

/// Lower bounds and an extrapolation of `ρ = lim sup μ*ⁿ(e)^{1/n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRadiusEstimate {
    /// `(n, ρ_n)` with `ρ_n = P^{2n}(e,e)^{1/2n}`, for every `n` with a positive return probability.
    pub lower_bounds: Vec<(u64, f64)>,
    /// `exp` of the fitted slope, clamped to at least the last lower bound.
    pub extrapolated: f64,
    /// Fitted polynomial exponent in `Pⁿ(e,e) ≈ c·ρⁿ·n^{−β}`.
    pub beta: f64,
    /// Powers used by the fit.
    pub window: (u64, u64),
    /// Whether `ρ_n` is non-decreasing; `None` for non-symmetric measures.
    pub monotone: Option<bool>,
}

impl SpectralRadiusEstimate {
    /// `R = 1/ρ`.
    pub fn radius(&self) -> f64 {
        1.0 / self.extrapolated
    }

    pub fn last_lower_bound(&self) -> Option<f64> {
        self.lower_bounds.last().map(|&(_, r)| r)
    }
}

/// Fits `log Pⁿ(e,e) = n·log ρ − β·log n + c` over the last half of the
/// nonzero return probabilities with `n ≤ n_max`.
pub fn spectral_radius<S, T>(walk: &mut T, n_max: u64) -> Result<SpectralRadiusEstimate, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let e = walk.measure().model().identity();
    let mut logs: Vec<Option<f64>> = Vec::with_capacity(n_max as usize + 1);
    walk.sweep(std::slice::from_ref(&e), n_max, &mut |_, probe| {
        let p = probe(0);
        logs.push(p.is_positive_value().then(|| p.ln()));
        ControlFlow::Continue(())
    })?;
    let lower_bounds: Vec<(u64, f64)> = (1..=n_max / 2)
        .filter_map(|n| logs[2 * n as usize].map(|l| (n, (l / (2 * n) as f64).exp())))
        .collect();
    let points: Vec<(f64, f64)> = (n_max / 2..=n_max)
        .filter(|&k| k >= 1)
        .filter_map(|k| logs[k as usize].map(|l| (k as f64, l)))
        .collect();
    if points.is_empty() || lower_bounds.is_empty() {
        return Err(KernelError::NoReturns(n_max));
    }
    let (slope, beta) = fit_exponential_power(&points);
    let last = lower_bounds.last().expect("non-empty").1;
    let monotone = walk.measure().is_symmetric().then(|| {
        lower_bounds
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12))
    });
    Ok(SpectralRadiusEstimate {
        extrapolated: slope.exp().max(last),
        beta,
        window: (points[0].0 as u64, points[points.len() - 1].0 as u64),
        lower_bounds,
        monotone,
    })
}

/// Least squares for `y = a·k − β·ln k + c`; returns `(a, β)`.
fn fit_exponential_power(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 3 {
        let (k0, y0) = points[0];
        let (k1, y1) = *points.last().expect("non-empty");
        return if points.len() == 1 { (y0 / k0, 0.0) } else { ((y1 - y0) / (k1 - k0), 0.0) };
    }
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| points.iter().map(f).sum::<f64>() / n;
    let (mk, ml, my) = (mean(&|p| p.0), mean(&|p| p.0.ln()), mean(&|p| p.1));
    let (mut skk, mut skl, mut sll, mut sky, mut sly) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(k, y) in points {
        let (dk, dl, dy) = (k - mk, k.ln() - ml, y - my);
        skk += dk * dk;
        skl += dk * dl;
        sll += dl * dl;
        sky += dk * dy;
        sly += dl * dy;
    }
    let det = skk * sll - skl * skl;
    if det.abs() <= 1e-12 * skk * sll {
        return (sky / skk, 0.0);
    }
    let a = (sky * sll - sly * skl) / det;
    let b = (skk * sly - skl * sky) / det;
    (a, -b)
}

/// Ratio sequence with a Cauchy-window convergence flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSequence<S: Scalar> {
    /// Entry `k` is `P^{k+1}(x,y)/P^k(x,y)`, `None` where `P^k(x,y) = 0`.
    pub ratios: Vec<Option<S>>,
    /// The last [`CAUCHY_WINDOW`] ratios are defined and spread less than the tolerance.
    pub converged: bool,
    pub spread: f64,
}

impl<S: Scalar> RatioSequence<S> {
    pub fn last(&self) -> Option<&S> {
        self.ratios.last().and_then(Option::as_ref)
    }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn require_lazy<S: Scalar, T: Transitions<S> + ?Sized>(walk: &T, allow: bool) -> Result<(), KernelError> {
    if walk.measure().is_lazy() || allow {
        Ok(())
    } else {
        Err(KernelError::NotLazy)
    }
}

/// Gerl ratios `P^{k+1}(x,y)/P^k(x,y)` for `k ≤ k_max`.
pub fn gerl_ratio<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    k_max: u64,
    tol: f64,
    allow_nonlazy: bool,
) -> Result<RatioSequence<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    require_lazy(walk, allow_nonlazy)?;
    let g = walk.measure().model().between(x, y)?;
    let key = walk.orbit_key(&g);
    let mut prev: Option<S> = None;
    let mut ratios = Vec::with_capacity(k_max as usize + 1);
    walk.sweep(std::slice::from_ref(&key), k_max + 1, &mut |n, probe| {
        let p = probe(0);
        if n > 0 {
            ratios.push(prev.as_ref().and_then(|q| p.divide(q)));
        }
        prev = Some(p);
        ControlFlow::Continue(())
    })?;
    let tail: Vec<Option<f64>> = ratios
        .iter()
        .rev()
        .take(CAUCHY_WINDOW)
        .map(|r| r.as_ref().map(S::as_f64))
        .collect();
    let defined: Vec<f64> = tail.iter().flatten().copied().collect();
    let full = tail.len() == CAUCHY_WINDOW && defined.len() == CAUCHY_WINDOW;
    let spread = if full { spread(&defined) } else { f64::INFINITY };
    Ok(RatioSequence {
        ratios,
        converged: full && spread < tol,
        spread,
    })
}

// ---------------------------------------------------------------------------
// Ratio-limit kernels

/// Settings for ratio-limit estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioLimitOptions {
    pub n_max: u64,
    /// Cauchy-window tolerance on the extrapolated sequence.
    pub tol: f64,
    /// Proceed on non-lazy measures (ratios may then be undefined at odd `n`).
    pub allow_nonlazy: bool,
}

impl Default for RatioLimitOptions {
    fn default() -> Self {
        RatioLimitOptions {
            n_max: 2000,
            tol: 1e-3,
            allow_nonlazy: false,
        }
    }
}

/// Estimate of `H(x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioLimitEstimate<S: Scalar> {
    /// Richardson value `(n·rₙ − m·rₘ)/(n − m)`, `m = ⌊n/2⌋`, at `n = n_max`.
    pub result: KernelResult<S>,
    /// The plain ratio `r_{n_max} = P^{n_max}(x,y)/P^{n_max}(e,y)`.
    pub raw: S,
    /// Spread of the Richardson values over the Cauchy window.
    pub spread: f64,
}

/// `H(x,y)` for many pairs from a single sweep.
///
/// With `rₙ = Pⁿ(x,y)/Pⁿ(e,y) ≈ H + c/n`, the combination
/// `(n·rₙ − m·rₘ)/(n − m)` removes the `1/n` term; convergence is judged on
/// the last [`CAUCHY_WINDOW`] such values.
pub fn ratio_limit_batch<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    opts: &RatioLimitOptions,
) -> Result<Vec<RatioLimitEstimate<S>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    require_lazy(walk, opts.allow_nonlazy)?;
    let n_max = opts.n_max;
    if n_max < 2 * CAUCHY_WINDOW as u64 {
        return Err(KernelError::Input(format!(
            "n_max must be at least {}",
            2 * CAUCHY_WINDOW
        )));
    }
    let model = walk.measure().model().clone();
    let e = model.identity();
    let window: Vec<u64> = (n_max + 1 - CAUCHY_WINDOW as u64..=n_max).collect();
    let mut levels: Vec<u64> = window.iter().flat_map(|&n| [n, n / 2]).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut targets = Targets::new();
    let mut idx = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let g = model.between(x, y)?;
        idx.push((targets.add(walk, &g), targets.add(walk, y)));
    }
    let level_pos: HashMap<u64, usize> = levels.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let ctx = walk.context().clone();
    let mut values: Vec<Vec<S>> = vec![Vec::with_capacity(levels.len()); targets.keys.len()];
    walk.sweep(&targets.keys, n_max, &mut |n, probe| {
        if level_pos.contains_key(&n) {
            for (t, v) in values.iter_mut().enumerate() {
                v.push(probe(t));
            }
        }
        ControlFlow::Continue(())
    })?;
    let mode = S::mode(&ctx);
    let mut out = Vec::with_capacity(pairs.len());
    for ((x, _), (i, j)) in pairs.iter().zip(idx) {
        let ratio_at = |n: u64| {
            let l = level_pos[&n];
            values[i][l].divide(&values[j][l])
        };
        let richardson = |n: u64| -> Option<S> {
            let m = n / 2;
            let (rn, rm) = (ratio_at(n)?, ratio_at(m)?);
            let (nn, mm) = (S::lift(&ctx, &int(n)), S::lift(&ctx, &int(m)));
            nn.times(&rn)
                .minus(&mm.times(&rm))
                .divide(&S::lift(&ctx, &int(n - m)))
        };
        let raw = ratio_at(n_max);
        let (value, spread, defined) = if *x == e {
            (S::one_with(&ctx), 0.0, raw.is_some())
        } else {
            let seq: Vec<Option<S>> = window.iter().map(|&n| richardson(n)).collect();
            let defined = seq.iter().all(Option::is_some);
            let fs: Vec<f64> = seq.iter().flatten().map(S::as_f64).collect();
            let spread = if defined { spread(&fs) } else { f64::INFINITY };
            let value = seq
                .last()
                .cloned()
                .flatten()
                .unwrap_or_else(|| S::zero_with(&ctx));
            (value, spread, defined)
        };
        let raw = raw.unwrap_or_else(|| S::zero_with(&ctx));
        out.push(RatioLimitEstimate {
            result: KernelResult {
                tail_estimate: value.minus(&raw).abs_value().as_f64(),
                value,
                mode,
                truncation: n_max,
                converged: defined && spread < opts.tol,
            },
            raw,
            spread,
        });
    }
    Ok(out)
}

fn int(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// `H(x,y)`.
pub fn ratio_limit_kernel<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    opts: &RatioLimitOptions,
) -> Result<RatioLimitEstimate<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(ratio_limit_batch(walk, &[(x.clone(), y.clone())], opts)?.remove(0))
}

/// Outcome of a ratio-limit radical test.
#[derive(Debug, Clone, PartialEq)]
pub struct RadicalEvidence {
    pub member: bool,
    /// Ball element with the largest `|H(x,y) − H(x,e)|`.
    pub worst: Option<GroupElement>,
    pub worst_gap: f64,
    pub all_converged: bool,
    pub checked: usize,
}

/// Is `y` in the ratio-limit radical, judged on the ball of `ball_radius`?
/// True when `max_x |H(x,y) − H(x,e)| < tol` and every estimate converged.
pub fn radical_membership<S, T>(
    walk: &mut T,
    y: &GroupElement,
    ball_radius: u32,
    tol: f64,
    opts: &RatioLimitOptions,
) -> Result<RadicalEvidence, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let table = WordNormTable::new(walk.measure(), ball_radius);
    let e = walk.measure().model().identity();
    let xs = table.ball(ball_radius).to_vec();
    let pairs: Vec<_> = xs
        .iter()
        .flat_map(|x| [(x.clone(), y.clone()), (x.clone(), e.clone())])
        .collect();
    let h = ratio_limit_batch::<S, T>(walk, &pairs, opts)?;
    let mut worst = None;
    let mut worst_gap = 0.0;
    let mut all_converged = true;
    for (i, x) in xs.iter().enumerate() {
        let (a, b) = (&h[2 * i], &h[2 * i + 1]);
        all_converged &= a.result.converged && b.result.converged;
        let gap = a.result.value.minus(&b.result.value).abs_value().as_f64();
        if worst.is_none() || gap > worst_gap {
            worst = Some(x.clone());
            worst_gap = gap;
        }
    }
    Ok(RadicalEvidence {
        member: all_converged && worst_gap < tol,
        worst,
        worst_gap,
        all_converged,
        checked: xs.len(),
    })
}

// ---------------------------------------------------------------------------
// Space-time kernels

/// A point `(z, m)` of `ST = {(z,m) : Pᵐ(e,z) > 0}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceTimePoint {
    pub z: GroupElement,
    pub m: u64,
}

impl SpaceTimePoint {
    /// Checks membership before constructing.
    pub fn new<S, T>(walk: &mut T, z: GroupElement, m: u64) -> Result<Self, KernelError>
    where
        S: Scalar,
        T: Transitions<S> + ?Sized,
    {
        if in_space_time::<S, T>(walk, &z, m)? {
            Ok(SpaceTimePoint { z, m })
        } else {
            Err(KernelError::NotInSpaceTime(format!(
                "({}, {m})",
                walk.measure().model().format(&z)
            )))
        }
    }

    /// Without the membership check.
    pub fn new_unchecked(z: GroupElement, m: u64) -> Self {
        SpaceTimePoint { z, m }
    }
}

/// `Pᵐ(e,z) > 0`. For lazy measures this is `m ≥ |z|_μ`, found by sweeping
/// only up to the first hit.
pub fn in_space_time<S, T>(walk: &mut T, z: &GroupElement, m: u64) -> Result<bool, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let key = walk.orbit_key(z);
    let lazy = walk.measure().is_lazy();
    let mut found = false;
    walk.sweep(std::slice::from_ref(&key), m, &mut |n, probe| {
        let positive = probe(0).is_positive_value();
        if (lazy && positive) || n == m {
            found = positive;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(found)
}

/// `K_ST((x,m),(y,n)) = P^{n−m}(x,y)/Pⁿ(e,y)`, zero for `n < m`.
pub fn space_time_kernel<S, T>(
    walk: &mut T,
    from: &SpaceTimePoint,
    to: &SpaceTimePoint,
) -> Result<S, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(space_time_batch(walk, &[(from.clone(), to.clone())])?.remove(0))
}

/// [`space_time_kernel`] for many pairs from one sweep.
pub fn space_time_batch<S, T>(
    walk: &mut T,
    pairs: &[(SpaceTimePoint, SpaceTimePoint)],
) -> Result<Vec<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let model = walk.measure().model().clone();
    let mut requests = Vec::with_capacity(2 * pairs.len());
    for (a, b) in pairs {
        let g = model.between(&a.z, &b.z)?;
        requests.push((g, b.m.saturating_sub(a.m)));
        requests.push((b.z.clone(), b.m));
    }
    let v = collect_values::<S, T>(walk, &requests)?;
    let ctx = walk.context().clone();
    pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let den = &v[2 * i + 1];
            if den.is_zero_value() {
                return Err(KernelError::NotInSpaceTime(format!(
                    "({}, {})",
                    model.format(&b.z),
                    b.m
                )));
            }
            if b.m < a.m {
                return Ok(S::zero_with(&ctx));
            }
            Ok(v[2 * i].divide(den).expect("nonzero"))
        })
        .collect()
}

/// `h_y(x,m) = Rᵐ·H(x,y)` from estimates of `R` and `H(x,y)`.
pub fn embedding_kernel<S: Scalar>(ctx: &S::Context, point: &SpaceTimePoint, r_est: &S, h_est: &S) -> S {
    r_est.pow_with(ctx, point.m).times(h_est)
}

/// `K_ST((x,m),(y,n))` along increasing `n`, against the predicted limit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTrace<S: Scalar> {
    /// `(n, K_ST((x,m),(y,n)), |K_ST − target|)`.
    pub points: Vec<(u64, S, f64)>,
    pub target: f64,
    /// The gap at the last level does not exceed the gap at the first.
    pub approaching: bool,
}

/// Companion check for [`embedding_kernel`]: the space-time kernel towards
/// `(y, n_k)` should approach `h_y(x,m)`.
pub fn embedding_trace<S, T>(
    walk: &mut T,
    from: &SpaceTimePoint,
    y: &GroupElement,
    levels: &[u64],
    target: f64,
) -> Result<EmbeddingTrace<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KernelError::BadSequence("increasing"));
    }
    let pairs: Vec<_> = levels
        .iter()
        .map(|&n| (from.clone(), SpaceTimePoint::new_unchecked(y.clone(), n)))
        .collect();
    let values = space_time_batch::<S, T>(walk, &pairs)?;
    let points: Vec<(u64, S, f64)> = levels
        .iter()
        .zip(values)
        .map(|(&n, v)| {
            let gap = (v.as_f64() - target).abs();
            (n, v, gap)
        })
        .collect();
    let approaching = match (points.first(), points.last()) {
        (Some(a), Some(b)) => b.2 <= a.2,
        _ => true,
    };
    Ok(EmbeddingTrace {
        points,
        target,
        approaching,
    })
}

// ---------------------------------------------------------------------------
// 0-Martin kernel and the λ → 0 limit

/// `K₀(x,y) = P^{|y|−|x|}(x,y)/P^{|y|}(e,y)` when `e, x, y` are aligned, else 0.
pub fn zero_martin_kernel<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    table: &WordNormTable,
) -> Result<S, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(zero_martin_batch(walk, &[(x.clone(), y.clone())], table)?.remove(0))
}

/// [`zero_martin_kernel`] for many pairs from one sweep.
pub fn zero_martin_batch<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    table: &WordNormTable,
) -> Result<Vec<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    let model = walk.measure().model().clone();
    let mut requests = Vec::new();
    let mut slots = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        if table.is_aligned(x, y)? {
            let (nx, ny) = (table.norm(x).expect("aligned"), table.norm(y).expect("aligned"));
            slots.push(Some(requests.len()));
            requests.push((model.between(x, y)?, u64::from(ny - nx)));
            requests.push((y.clone(), u64::from(ny)));
        } else {
            slots.push(None);
        }
    }
    let v = collect_values::<S, T>(walk, &requests)?;
    let ctx = walk.context().clone();
    Ok(slots
        .into_iter()
        .map(|slot| match slot {
            Some(r) => v[r].divide(&v[r + 1]).expect("P^{|y|}(e,y) > 0 on the table"),
            None => S::zero_with(&ctx),
        })
        .collect())
}

/// Gaps `|λ^{|x|}K(x,y|λ) − K₀(x,y)|` along a decreasing `λ` list.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledLimitReport<S: Scalar> {
    pub x: GroupElement,
    pub y: GroupElement,
    pub k0: S,
    /// `(λ, gap)` in the order given.
    pub gaps: Vec<(f64, S)>,
    /// Least-squares slope of `log gap` against `log λ` over nonzero gaps.
    pub slope: Option<f64>,
    /// The gap at the smallest `λ` is below the gap at the largest (or all vanish).
    pub shrinking: bool,
    pub converged: bool,
    pub passes: bool,
}

/// Minimum log-log slope accepted by [`rescaled_limit_batch`].
pub const RESCALED_MIN_SLOPE: f64 = 0.9;

/// Rescaled `λ → 0` limit for one pair.
pub fn rescaled_limit_check<S, T>(
    walk: &mut T,
    x: &GroupElement,
    y: &GroupElement,
    lambdas: &[S],
    table: &WordNormTable,
    opts: &SeriesOptions,
) -> Result<RescaledLimitReport<S>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    Ok(rescaled_limit_batch(walk, &[(x.clone(), y.clone())], lambdas, table, opts)?.remove(0))
}

/// Rescaled `λ → 0` limit for many pairs; one series run per `λ`.
///
/// A pair passes when every gap is zero, or when the fitted slope is at
/// least [`RESCALED_MIN_SLOPE`] and the gaps shrink.
pub fn rescaled_limit_batch<S, T>(
    walk: &mut T,
    pairs: &[(GroupElement, GroupElement)],
    lambdas: &[S],
    table: &WordNormTable,
    opts: &SeriesOptions,
) -> Result<Vec<RescaledLimitReport<S>>, KernelError>
where
    S: Scalar,
    T: Transitions<S> + ?Sized,
{
    if lambdas.is_empty() {
        return Err(KernelError::Input("empty λ list".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(KernelError::BadSequence("decreasing"));
    }
    let k0 = zero_martin_batch::<S, T>(walk, pairs, table)?;
    let ctx = walk.context().clone();
    let norms: Vec<u64> = pairs
        .iter()
        .map(|(x, _)| {
            table.norm(x).map(u64::from).ok_or_else(|| {
                KernelError::from(GroupError::OutOfRadius {
                    element: table.model().format(x),
                    radius: table.radius(),
                })
            })
        })
        .collect::<Result<_, _>>()?;
    let mut gaps: Vec<Vec<(f64, S)>> = vec![Vec::with_capacity(lambdas.len()); pairs.len()];
    let mut converged = vec![true; pairs.len()];
    let grid = martin_grid::<S, T>(walk, pairs, lambdas, opts)?;
    for (lambda, ks) in lambdas.iter().zip(grid) {
        let lf = lambda.as_f64();
        let mut powers: HashMap<u64, S> = HashMap::new();
        for (i, k) in ks.into_iter().enumerate() {
            let scale = powers
                .entry(norms[i])
                .or_insert_with(|| lambda.pow_with(&ctx, norms[i]))
                .clone();
            converged[i] &= k.converged;
            gaps[i].push((lf, scale.times(&k.value).minus(&k0[i]).abs_value()));
        }
    }
    Ok(pairs
        .iter()
        .zip(k0)
        .zip(gaps)
        .zip(converged)
        .map(|((((x, y), k0), gaps), converged)| {
            let nonzero: Vec<(f64, f64)> = gaps
                .iter()
                .filter(|(_, g)| !g.is_zero_value())
                .map(|(l, g)| (l.ln(), g.ln()))
                .collect();
            let slope = (nonzero.len() >= 2).then(|| least_squares_slope(&nonzero));
            let first = gaps[0].1.as_f64();
            let last_gap = &gaps[gaps.len() - 1].1;
            let all_zero = nonzero.is_empty();
            let shrinking = all_zero || last_gap.as_f64() < first || last_gap.is_zero_value();
            let passes = all_zero
                || match slope {
                    Some(s) => s >= RESCALED_MIN_SLOPE && shrinking,
                    None => last_gap.is_zero_value(),
                };
            RescaledLimitReport {
                x: x.clone(),
                y: y.clone(),
                k0,
                gaps,
                slope,
                shrinking,
                converged,
                passes,
            }
        })
        .collect())
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use num_bigint::BigInt;

    use super::*;
    use crate::convolution::{PowerCache, RadialFreeWalk};
    use crate::group::GroupModel;
    use crate::measure::Measure;
    use crate::scalar::ratio;

    fn z_lazy() -> PowerCache<BigRational> {
        let mu = Measure::lazy_simple(GroupModel::free_abelian(1).unwrap(), ratio(1, 2)).unwrap();
        PowerCache::new(mu, ()).unwrap()
    }

    fn z(k: i64) -> GroupElement {
        GroupElement::integer(k)
    }

    /// Lazy walk on ℤ: `μ*ⁿ(k) = C(2n, n+k)/4ⁿ`.
    fn binomial_oracle(n: u64, k: i64) -> BigRational {
        let top = 2 * n as i64;
        let j = n as i64 + k;
        if j < 0 || j > top {
            return ratio(0, 1);
        }
        let mut c = BigInt::from(1);
        for i in 0..j {
            c = c * BigInt::from(top - i) / BigInt::from(i + 1);
        }
        BigRational::new(c, BigInt::from(4).pow(n as u32))
    }

    #[test]
    fn sweep_agrees_with_binomial_oracle() {
        let mut w = z_lazy();
        let reqs: Vec<_> = [(0, 40), (3, 40), (-7, 25), (5, 3)]
            .iter()
            .map(|&(k, n)| (z(k), n))
            .collect();
        let v = collect_values::<BigRational, _>(&mut w, &reqs).unwrap();
        for ((g, n), got) in reqs.iter().zip(v) {
            let GroupElement::Abelian(c) = g else { unreachable!() };
            assert_eq!(got, binomial_oracle(*n, c[0]));
        }
    }

    #[test]
    fn green_at_zero_is_delta() {
        let mut w = z_lazy();
        let o = SeriesOptions::default();
        let zero = ratio(0, 1);
        assert_eq!(green(&mut w, &z(2), &z(2), &zero, &o).unwrap().value, ratio(1, 1));
        let r = green(&mut w, &z(2), &z(3), &zero, &o).unwrap();
        assert_eq!(r.value, ratio(0, 1));
        assert!(r.converged);
        assert!(green(&mut w, &z(0), &z(0), &ratio(-1, 2), &o).is_err());
    }

    #[test]
    fn green_matches_oracle_series() {
        let mut w = z_lazy();
        let lambda = ratio(1, 2);
        let o = SeriesOptions {
            eps: 1e-15,
            ..Default::default()
        };
        let r = green(&mut w, &z(0), &z(0), &lambda, &o).unwrap();
        assert!(r.converged);
        let mut oracle = ratio(0, 1);
        for n in 0..=r.truncation {
            oracle += binomial_oracle(n, 0) * BigRational::new(1.into(), BigInt::from(2).pow(n as u32));
        }
        assert_eq!(r.value, oracle);
        // Σ C(2n,n)(λ/4)ⁿ = 1/√(1 − λ).
        let exact = 1.0 / (1.0f64 - 0.5).sqrt();
        assert!((r.value.as_f64() - exact).abs() < 1e-12);
    }

    #[test]
    fn martin_kernel_base_point_and_harnack() {
        let mut w = z_lazy();
        let o = SeriesOptions::default();
        let lambda = ratio(1, 4);
        for y in -4..=4 {
            let k = martin_kernel(&mut w, &z(0), &z(y), &lambda, &o).unwrap();
            assert_eq!(k.value, ratio(1, 1));
        }
        for x in -3..=3i64 {
            for y in -4..=4 {
                let k = martin_kernel(&mut w, &z(x), &z(y), &lambda, &o).unwrap();
                let n = x.unsigned_abs();
                let bound = 1.0 / (0.25f64.powi(n as i32) * binomial_oracle(n, x).as_f64());
                assert!(k.value.as_f64() <= bound * (1.0 + 1e-9), "{x} {y}");
            }
        }
        assert!(martin_kernel(&mut w, &z(1), &z(1), &ratio(0, 1), &o).is_err());
        let above = SeriesOptions {
            radius: Some(1.0),
            ..o
        };
        assert!(martin_kernel(&mut w, &z(1), &z(1), &ratio(1, 1), &above).is_err());
    }

    #[test]
    fn martin_kernel_at_r_on_finite_group() {
        // Finite groups are recurrent with R = 1 and K(x,y|λ) → 1.
        let model = GroupModel::cyclic(5).unwrap();
        let mu = Measure::lazy_simple(model.clone(), ratio(1, 2)).unwrap();
        let mut w = PowerCache::<BigRational>::new(mu, ()).unwrap();
        let lambdas: Vec<_> = (1..=5).map(|k| ratio(1, 1) - ratio(1, 1 << k)).collect();
        let o = SeriesOptions {
            eps: 1e-10,
            ..Default::default()
        };
        let (x, y) = (model.parse("2").unwrap(), model.parse("4").unwrap());
        let r = martin_kernel_at_r(&mut w, &x, &y, &lambdas, 1.0, 1e-3, &o).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value.as_f64() - 1.0).abs() < 1e-3, "{r:?}");
        let e = martin_kernel_at_r(&mut w, &model.identity(), &y, &lambdas, 1.0, 1e-3, &o).unwrap();
        assert_eq!(e.value, ratio(1, 1));
        let mut bad = lambdas.clone();
        bad.push(ratio(2, 1));
        assert!(martin_kernel_at_r(&mut w, &x, &y, &bad, 1.0, 1e-3, &o).is_err());
    }

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [0.5, 0.25, 0.125, 0.0625];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x + x * x).collect();
        let est = neville_at_zero(&xs, &ys);
        assert!((est[2] - 3.0).abs() < 1e-12);
        assert!((est[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn space_time_hand_values() {
        let mut w = z_lazy();
        let p = |w: &mut PowerCache<BigRational>, k, m| SpaceTimePoint::new(w, z(k), m).unwrap();
        let (a, b) = (p(&mut w, 1, 1), p(&mut w, 2, 2));
        assert_eq!(space_time_kernel(&mut w, &a, &b).unwrap(), ratio(4, 1));
        let (a, b) = (p(&mut w, 0, 2), p(&mut w, 0, 3));
        assert_eq!(space_time_kernel(&mut w, &a, &b).unwrap(), ratio(8, 5));
        let origin = p(&mut w, 0, 0);
        assert_eq!(space_time_kernel(&mut w, &origin, &b).unwrap(), ratio(1, 1));
        assert!(SpaceTimePoint::new::<BigRational, _>(&mut w, z(3), 2).is_err());
        assert_eq!(space_time_kernel(&mut w, &b, &a).unwrap(), ratio(0, 1));
    }

    #[test]
    fn zero_martin_on_z() {
        let mut w = z_lazy();
        let table = WordNormTable::new(w.measure(), 10);
        assert_eq!(zero_martin_kernel(&mut w, &z(1), &z(3), &table).unwrap(), ratio(4, 1));
        assert_eq!(zero_martin_kernel(&mut w, &z(0), &z(-5), &table).unwrap(), ratio(1, 1));
        assert_eq!(zero_martin_kernel(&mut w, &z(1), &z(-2), &table).unwrap(), ratio(0, 1));
        assert_eq!(zero_martin_kernel(&mut w, &z(-3), &z(-7), &table).unwrap(), ratio(64, 1));
    }

    #[test]
    fn spectral_radius_of_free_group() {
        let mu = Measure::simple(GroupModel::free(2).unwrap()).unwrap();
        let mut w = RadialFreeWalk::<BigRational>::new(mu, ()).unwrap();
        let est = spectral_radius(&mut w, 600).unwrap();
        let kesten = 3f64.sqrt() / 2.0;
        assert!((est.extrapolated - kesten).abs() < 1e-3, "{est:?}");
        assert!((est.beta - 1.5).abs() < 0.1, "{}", est.beta);
        assert_eq!(est.monotone, Some(true));
        assert!(est.last_lower_bound().unwrap() <= kesten);
    }

    #[test]
    fn gerl_ratios_on_z() {
        let mut w = z_lazy();
        let seq = gerl_ratio(&mut w, &z(0), &z(3), 300, 1e-2, false).unwrap();
        assert_eq!(seq.ratios.len(), 301);
        assert!(seq.ratios[0].is_none() && seq.ratios[2].is_none());
        assert!(seq.ratios[3].is_some());
        assert!((seq.last().unwrap().as_f64() - 1.0).abs() < 1e-2);
        assert!(seq.converged);
        let simple = Measure::simple(GroupModel::free_abelian(1).unwrap()).unwrap();
        let mut s = PowerCache::<BigRational>::new(simple, ()).unwrap();
        assert!(matches!(
            gerl_ratio(&mut s, &z(0), &z(0), 10, 1e-2, false),
            Err(KernelError::NotLazy)
        ));
    }

    #[test]
    fn ratio_limit_on_z() {
        let mut w = z_lazy();
        let opts = RatioLimitOptions {
            n_max: 400,
            tol: 1e-2,
            allow_nonlazy: false,
        };
        let h = ratio_limit_kernel(&mut w, &z(0), &z(4), &opts).unwrap();
        assert_eq!(h.result.value, ratio(1, 1));
        let h = ratio_limit_kernel(&mut w, &z(-3), &z(3), &opts).unwrap();
        // Raw ratio ≈ exp(−18/400); Richardson removes the 1/n term.
        assert!((h.raw.as_f64() - 1.0).abs() > 2e-2);
        assert!((h.result.value.as_f64() - 1.0).abs() < 5e-3, "{h:?}");
        assert!(h.result.converged);
    }

    #[test]
    fn rescaled_limit_on_z() {
        let mut w = z_lazy();
        let table = WordNormTable::new(w.measure(), 8);
        let lambdas: Vec<_> = (3..=10).map(|k| ratio(1, 1 << k)).collect();
        let o = SeriesOptions {
            eps: 1e-20,
            ..Default::default()
        };
        let r = rescaled_limit_check(&mut w, &z(1), &z(3), &lambdas, &table, &o).unwrap();
        assert_eq!(r.k0, ratio(4, 1));
        assert!(r.passes, "{r:?}");
        let r = rescaled_limit_check(&mut w, &z(1), &z(-2), &lambdas, &table, &o).unwrap();
        assert_eq!(r.k0, ratio(0, 1));
        assert!(r.passes && r.slope.unwrap() >= 0.9);
        let r = rescaled_limit_check(&mut w, &z(0), &z(3), &lambdas, &table, &o).unwrap();
        assert!(r.gaps.iter().all(|(_, g)| g.is_zero_value()));
    }

    #[test]
    fn martin_distance_basics() {
        let mut w = z_lazy();
        let table = WordNormTable::new(w.measure(), 3);
        let o = SeriesOptions::default();
        let l = ratio(1, 4);
        let d = martin_distance(&mut w, &z(2), &z(2), &l, &table, &o).unwrap();
        assert_eq!(d.value, ratio(0, 1));
        let a = martin_distance(&mut w, &z(1), &z(-2), &l, &table, &o).unwrap();
        let b = martin_distance(&mut w, &z(-2), &z(1), &l, &table, &o).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.value > ratio(0, 1));
    }
}
