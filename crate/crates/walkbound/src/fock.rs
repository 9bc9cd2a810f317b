//! Truncated matrix models of the space-time shift operators on the Fock
//! space `⊕_z ℓ²(ST_z)` and the peaking inequality.
//!
//! Matrix coefficients are square roots of probability ratios. An
//! [`Entry`] keeps the exact rational square alongside the sign, so squared
//! quantities (diagonals of `TT*`, norm-squares) stay exact; only the
//! displayed value goes through `f64`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::convolution::{ConvolutionError, Transitions};
use crate::group::{GroupElement, GroupError, GroupModel};
use crate::kernel::{collect_values, KernelError};
use crate::scalar::rational_to_f64;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("P^{n}({x}, {y}) = 0: the operator vanishes")]
    ZeroTransition { n: u64, x: String, y: String },
    #[error("basis exceeds {0} vectors")]
    Budget(usize),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("operator dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("power iteration did not settle after {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A real matrix coefficient `±√square`, or a plain float once sums of
/// unlike surds appear.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Surd { negative: bool, square: BigRational },
    Float(f64),
}

impl Entry {
    pub fn zero() -> Self {
        Entry::Surd {
            negative: false,
            square: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        Entry::sqrt_of(BigRational::one())
    }

    /// `√q` for `q ≥ 0`.
    pub fn sqrt_of(q: BigRational) -> Self {
        debug_assert!(!q.is_negative());
        Entry::Surd {
            negative: false,
            square: q,
        }
    }

    pub fn from_rational(q: &BigRational) -> Self {
        Entry::Surd {
            negative: q.is_negative(),
            square: q * q,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Entry::Surd { negative, square } => {
                let v = rational_to_f64(square).sqrt();
                if *negative {
                    -v
                } else {
                    v
                }
            }
            Entry::Float(v) => *v,
        }
    }

    /// The exact square, when known.
    pub fn square(&self) -> Option<&BigRational> {
        match self {
            Entry::Surd { square, .. } => Some(square),
            Entry::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Entry::Surd { square, .. } => square.is_zero(),
            Entry::Float(v) => *v == 0.0,
        }
    }

    pub fn times(&self, other: &Entry) -> Entry {
        match (self, other) {
            (
                Entry::Surd { negative: a, square: p },
                Entry::Surd { negative: b, square: q },
            ) => Entry::Surd {
                negative: a ^ b,
                square: p * q,
            },
            _ => Entry::Float(self.value() * other.value()),
        }
    }

    pub fn plus(&self, other: &Entry) -> Entry {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        match (self, other) {
            (
                Entry::Surd { negative: a, square: p },
                Entry::Surd { negative: b, square: q },
            ) if p == q => {
                if a == b {
                    Entry::Surd {
                        negative: *a,
                        square: p * BigInt::from(4),
                    }
                } else {
                    Entry::zero()
                }
            }
            _ => Entry::Float(self.value() + other.value()),
        }
    }

    /// Equality of exact squares and signs, or `|a − b| ≤ tol` otherwise.
    pub fn matches(&self, other: &Entry, tol: f64) -> bool {
        match (self, other) {
            (Entry::Surd { .. }, Entry::Surd { .. }) if self.is_zero() && other.is_zero() => true,
            (Entry::Surd { .. }, Entry::Surd { .. }) => self == other,
            _ => (self.value() - other.value()).abs() <= tol,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Surd { negative, square } => {
                let sign = if *negative { "-" } else { "" };
                write!(f, "{sign}sqrt({square})")
            }
            Entry::Float(v) => write!(f, "{v:e}"),
        }
    }
}

/// Basis vectors `e^{(m)}_{x,z}` of `ℓ²(ST_z)` truncated at level `M`:
/// pairs `(x, m)` with `Pᵐ(x,z) > 0`, level-major, then by canonical
/// encoding of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    z: GroupElement,
    max_level: u64,
    vectors: Vec<(GroupElement, u64)>,
    index: HashMap<(GroupElement, u64), usize>,
}

impl FockBasis {
    pub fn target(&self) -> &GroupElement {
        &self.z
    }

    pub fn max_level(&self) -> u64 {
        self.max_level
    }

    pub fn vectors(&self) -> &[(GroupElement, u64)] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn position(&self, x: &GroupElement, m: u64) -> Option<usize> {
        self.index.get(&(x.clone(), m)).copied()
    }
}

/// Default cap on basis vectors per target.
pub const BASIS_BUDGET: usize = 2_000_000;

/// `{(x,m) : m ≤ M, Pᵐ(x,z) > 0}`. Membership comes from the support of
/// the exact `μ*ᵐ`: `x = z·g⁻¹` with `g ∈ supp μ*ᵐ`.
pub fn enumerate_basis<T>(
    walk: &mut T,
    z: &GroupElement,
    max_level: u64,
    budget: usize,
) -> Result<FockBasis, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    let model = walk.measure().model().clone();
    let mut vectors = Vec::new();
    for m in 0..=max_level {
        let support = walk.support(m)?;
        if vectors.len() + support.len() > budget {
            return Err(FockError::Budget(budget));
        }
        let mut level: Vec<GroupElement> = support
            .iter()
            .map(|g| model.mul(z, &model.inv(g)?))
            .collect::<Result<_, _>>()?;
        level.sort_by_cached_key(GroupElement::encode);
        vectors.extend(level.into_iter().map(|x| (x, m)));
    }
    let index = vectors.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    Ok(FockBasis {
        z: z.clone(),
        max_level,
        vectors,
        index,
    })
}

/// A finite direct sum of truncated `ℓ²(ST_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpace {
    bases: Vec<FockBasis>,
    offsets: Vec<usize>,
}

impl FockSpace {
    pub fn new(bases: Vec<FockBasis>) -> Self {
        let mut offsets = Vec::with_capacity(bases.len() + 1);
        let mut acc = 0;
        for b in &bases {
            offsets.push(acc);
            acc += b.len();
        }
        offsets.push(acc);
        FockSpace { bases, offsets }
    }

    pub fn single(basis: FockBasis) -> Self {
        Self::new(vec![basis])
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().expect("offsets")
    }

    pub fn bases(&self) -> &[FockBasis] {
        &self.bases
    }

    /// Global index range of the block for the `b`-th target.
    pub fn block(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn position(&self, x: &GroupElement, m: u64, z: &GroupElement) -> Option<usize> {
        let b = self.bases.iter().position(|basis| basis.z == *z)?;
        Some(self.offsets[b] + self.bases[b].position(x, m)?)
    }

    /// `(z, x, m)` of a global index.
    pub fn vector(&self, i: usize) -> (&GroupElement, &GroupElement, u64) {
        let b = self.offsets.partition_point(|&o| o <= i) - 1;
        let (x, m) = &self.bases[b].vectors[i - self.offsets[b]];
        (&self.bases[b].z, x, *m)
    }
}

/// A sparse real matrix on a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: BTreeMap<(usize, usize), Entry>,
    /// Images dropped because they landed above the level cap.
    pub compressed: usize,
}

impl SparseOperator {
    pub fn zero(dim: usize) -> Self {
        SparseOperator {
            dim,
            entries: BTreeMap::new(),
            compressed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stores `value` at `(row, col)`; zeros are not stored.
    pub fn set(&mut self, row: usize, col: usize, value: Entry) {
        if value.is_zero() {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), value);
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Entry {
        self.entries.get(&(row, col)).cloned().unwrap_or_else(Entry::zero)
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Entry)> {
        self.entries.iter().map(|(&(r, c), v)| (r, c, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn adjoint(&self) -> Self {
        SparseOperator {
            dim: self.dim,
            entries: self.entries.iter().map(|(&(r, c), v)| ((c, r), v.clone())).collect(),
            compressed: self.compressed,
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator, FockError> {
        if self.dim != other.dim {
            return Err(FockError::Dimension(self.dim, other.dim));
        }
        let mut by_row: HashMap<usize, Vec<(usize, &Entry)>> = HashMap::new();
        for (&(r, c), v) in &other.entries {
            by_row.entry(r).or_default().push((c, v));
        }
        let mut out = SparseOperator::zero(self.dim);
        for (&(i, k), a) in &self.entries {
            let Some(row) = by_row.get(&k) else { continue };
            for &(j, b) in row {
                let sum = out.get(i, j).plus(&a.times(b));
                out.set(i, j, sum);
            }
        }
        Ok(out)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.keys().all(|(r, c)| r == c)
    }

    /// Compression to the index range (the block of one target `z`).
    pub fn restrict(&self, range: std::ops::Range<usize>) -> SparseOperator {
        let start = range.start;
        SparseOperator {
            dim: range.len(),
            entries: self
                .entries
                .range((range.start, 0)..(range.end, 0))
                .filter(|(&(_, c), _)| range.contains(&c))
                .map(|(&(r, c), v)| ((r - start, c - start), v.clone()))
                .collect(),
            compressed: 0,
        }
    }

    /// Entrywise agreement under [`Entry::matches`].
    pub fn matches(&self, other: &SparseOperator, tol: f64) -> bool {
        self.dim == other.dim
            && self
                .entries
                .keys()
                .chain(other.entries.keys())
                .all(|&(r, c)| self.get(r, c).matches(&other.get(r, c), tol))
    }

    /// Coordinate-list text: `# key=value` header lines, then
    /// `row,col,value,square` with the exact square as `p/q` when known.
    pub fn to_coordinate_text(&self, header: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in header {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&format!("# dim={}\n# compressed={}\nrow,col,value,square\n", self.dim, self.compressed));
        for (r, c, v) in self.entries() {
            let sq = v.square().map_or_else(String::new, |q| {
                let s = q.to_string();
                if v.value() < 0.0 {
                    format!("-{s}")
                } else {
                    s
                }
            });
            out.push_str(&format!("{r},{c},{:.17e},{sq}\n", v.value()));
        }
        out
    }
}

/// Squared coefficients of `S⁽ⁿ⁾ₓ,ᵧ` (or `T` with `normalize`) on every
/// column `e^{(m)}_{y,z}` of the space whose image stays below the cap.
fn shift_operator<T>(
    walk: &mut T,
    n: u64,
    x: &GroupElement,
    y: &GroupElement,
    space: &FockSpace,
    normalize: bool,
) -> Result<SparseOperator, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    let model = walk.measure().model().clone();
    let pn = walk.p_n(x, y, n)?;
    if pn.is_zero() {
        return Err(FockError::ZeroTransition {
            n,
            x: model.format(x),
            y: model.format(y),
        });
    }
    let mut op = SparseOperator::zero(space.dim());
    let mut columns = Vec::new();
    let mut requests = Vec::new();
    for (b, basis) in space.bases.iter().enumerate() {
        for (j, (y2, m)) in basis.vectors.iter().enumerate() {
            if y2 != y {
                continue;
            }
            if n + m > basis.max_level {
                op.compressed += 1;
                continue;
            }
            let row = basis
                .position(x, n + m)
                .ok_or_else(|| FockError::BasisMismatch(format!("missing image of column {j}")))?;
            columns.push((space.offsets[b] + row, space.offsets[b] + j));
            requests.push((model.between(y, &basis.z)?, *m));
            requests.push((model.between(x, &basis.z)?, n + m));
        }
    }
    let values = collect_values::<BigRational, T>(walk, &requests)?;
    for (k, (row, col)) in columns.into_iter().enumerate() {
        let (pm, pnm) = (&values[2 * k], &values[2 * k + 1]);
        let mut square = pm / pnm;
        if !normalize {
            square *= &pn;
        }
        op.set(row, col, Entry::sqrt_of(square));
    }
    Ok(op)
}

/// `S⁽ⁿ⁾ₓ,ᵧ e^{(m)}_{y,z} = √(Pⁿ(x,y)Pᵐ(y,z)/P^{n+m}(x,z)) e^{(n+m)}_{x,z}`,
/// compressed to the level cap.
pub fn build_s<T>(
    walk: &mut T,
    n: u64,
    x: &GroupElement,
    y: &GroupElement,
    space: &FockSpace,
) -> Result<SparseOperator, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    shift_operator(walk, n, x, y, space, false)
}

/// `T⁽ⁿ⁾ₓ,ᵧ = S⁽ⁿ⁾ₓ,ᵧ / √Pⁿ(x,y)`.
pub fn build_t<T>(
    walk: &mut T,
    n: u64,
    x: &GroupElement,
    y: &GroupElement,
    space: &FockSpace,
) -> Result<SparseOperator, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    shift_operator(walk, n, x, y, space, true)
}

/// Projection onto `span{e^{(ℓ)}_{x,z}}` over all targets.
pub fn build_q(ell: u64, x: &GroupElement, space: &FockSpace) -> SparseOperator {
    let mut op = SparseOperator::zero(space.dim());
    for (b, basis) in space.bases.iter().enumerate() {
        if let Some(i) = basis.position(x, ell) {
            let i = space.offsets[b] + i;
            op.set(i, i, Entry::one());
        }
    }
    op
}

/// Outcome of comparing `Ad_{U_g}(S⁽ⁿ⁾ₓ,ᵧ)` with `S⁽ⁿ⁾_{g⁻¹x,g⁻¹y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationCheck {
    pub matches: bool,
    pub compared: usize,
    pub mismatch: Option<String>,
}

/// Relabels `S⁽ⁿ⁾ₓ,ᵧ` on `ℓ²(ST_z)` through `e^{(m)}_{x',z} ↦ e^{(m)}_{g⁻¹x',g⁻¹z}`
/// and compares entrywise with `S⁽ⁿ⁾_{g⁻¹x,g⁻¹y}` built on `target`.
#[allow(clippy::too_many_arguments)]
pub fn conjugate_by_unitary<T>(
    walk: &mut T,
    g: &GroupElement,
    n: u64,
    x: &GroupElement,
    y: &GroupElement,
    source: &FockBasis,
    target: &FockBasis,
    tol: f64,
) -> Result<ConjugationCheck, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    let model = walk.measure().model().clone();
    let gi = model.inv(g)?;
    let shift = |a: &GroupElement| model.mul(&gi, a);
    if source.max_level != target.max_level
        || source.len() != target.len()
        || target.z != shift(&source.z)?
    {
        return Err(FockError::BasisMismatch(format!(
            "target basis is not the translate of {} by {}",
            model.format(&source.z),
            model.format(g)
        )));
    }
    let mut relabel = Vec::with_capacity(source.len());
    for (a, m) in &source.vectors {
        let moved = shift(a)?;
        relabel.push(target.position(&moved, *m).ok_or_else(|| {
            FockError::BasisMismatch(format!("({}, {m}) has no translate", model.format(a)))
        })?);
    }
    let original = build_s(walk, n, x, y, &FockSpace::single(source.clone()))?;
    let expected = build_s(walk, n, &shift(x)?, &shift(y)?, &FockSpace::single(target.clone()))?;
    let mut moved = SparseOperator::zero(target.len());
    for (r, c, v) in original.entries() {
        moved.set(relabel[r], relabel[c], v.clone());
    }
    let compared = moved.nnz().max(expected.nnz());
    let mismatch = moved
        .entries()
        .map(|(r, c, _)| (r, c))
        .chain(expected.entries().map(|(r, c, _)| (r, c)))
        .find(|&(r, c)| !moved.get(r, c).matches(&expected.get(r, c), tol))
        .map(|(r, c)| {
            let (xr, mr) = &target.vectors[r];
            let (xc, mc) = &target.vectors[c];
            format!("row ({}, {mr}) col ({}, {mc})", model.format(xr), model.format(xc))
        });
    Ok(ConjugationCheck {
        matches: mismatch.is_none(),
        compared,
        mismatch,
    })
}

/// Default iteration cap for [`operator_norm`].
pub const NORM_ITERATIONS: usize = 10_000;

/// Largest singular value by power iteration on `A*A` from the normalized
/// all-ones vector, stopping when the Rayleigh quotient moves by at most
/// `tol` relative.
pub fn operator_norm(op: &SparseOperator, tol: f64, max_iter: usize) -> Result<f64, FockError> {
    let dim = op.dim();
    if dim == 0 || op.nnz() == 0 {
        return Ok(0.0);
    }
    let entries: Vec<(usize, usize, f64)> = op.entries().map(|(r, c, v)| (r, c, v.value())).collect();
    let apply = |v: &[f64], transpose: bool| {
        let mut out = vec![0.0; dim];
        for &(r, c, a) in &entries {
            if transpose {
                out[c] += a * v[r];
            } else {
                out[r] += a * v[c];
            }
        }
        out
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut last = f64::NAN;
    for _ in 0..max_iter {
        let av = apply(&v, false);
        let rayleigh = av.iter().map(|a| a * a).sum::<f64>();
        if (rayleigh - last).abs() <= tol * rayleigh {
            return Ok(rayleigh.sqrt());
        }
        last = rayleigh;
        let w = apply(&av, true);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|a| a / nw).collect();
    }
    Err(FockError::NoConvergence(max_iter))
}

// ---------------------------------------------------------------------------
// Peaking inequality

/// `Pᵏ(e,z)` for `z` in a scan set and `k ≤ M`.
struct ReturnGrid {
    zs: Vec<GroupElement>,
    /// `values[i][k] = Pᵏ(e, zs[i])`
    values: Vec<Vec<BigRational>>,
}

impl ReturnGrid {
    fn new<T>(walk: &mut T, zs: Vec<GroupElement>, max_level: u64) -> Result<Self, FockError>
    where
        T: Transitions<BigRational> + ?Sized,
    {
        let requests: Vec<_> = zs
            .iter()
            .flat_map(|z| (0..=max_level).map(move |k| (z.clone(), k)))
            .collect();
        let flat = collect_values::<BigRational, T>(walk, &requests)?;
        let values = flat.chunks(max_level as usize + 1).map(<[_]>::to_vec).collect();
        Ok(ReturnGrid { zs, values })
    }

    /// Max of `K_ST((e,n),(z,m)) = P^{m−n}(e,z)/Pᵐ(e,z)` over ST points with
    /// `m ∈ levels`, `z` passing `keep`.
    fn sup(
        &self,
        n: u64,
        levels: std::ops::RangeInclusive<u64>,
        keep: impl Fn(&GroupElement) -> bool,
    ) -> (BigRational, Option<(usize, u64)>) {
        let mut best = BigRational::zero();
        let mut arg = None;
        for (i, z) in self.zs.iter().enumerate() {
            if !keep(z) {
                continue;
            }
            for m in levels.clone() {
                let den = &self.values[i][m as usize];
                if den.is_zero() || m < n {
                    continue;
                }
                let v = &self.values[i][(m - n) as usize] / den;
                if arg.is_none() || v > best {
                    best = v;
                    arg = Some((i, m));
                }
            }
        }
        (best, arg)
    }
}

/// Truncation knobs for [`peaking_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeakingOptions {
    pub candidates: Vec<u64>,
    /// Targets `z` range over the walk's scan set of this radius.
    pub z_radius: u32,
    pub max_level: u64,
    /// Estimate of `R = 1/ρ`.
    pub r_est: f64,
}

impl Default for PeakingOptions {
    fn default() -> Self {
        PeakingOptions {
            candidates: (1..=12).collect(),
            z_radius: 40,
            max_level: 40,
            r_est: 1.0,
        }
    }
}

/// One candidate `n` of the peaking experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakingRow {
    pub n: u64,
    /// `1/Pⁿ(e,e) = ‖T e^{(0)}_{e,e}‖²`, a lower bound for `‖π_e(T⁽ⁿ⁾ₑ,ₑ)‖²`.
    pub lower_bound: BigRational,
    /// `sup K_ST((e,n),(z,m))` over `z ≠ e` in the scan set, `m ≤ M`.
    pub truncated_sup: BigRational,
    pub argsup: Option<(String, u64)>,
    /// `R_estⁿ·Pⁿ(e,e)`.
    pub boundary_term: f64,
    /// `sup K_ST((e,n),(z,m))` over all scanned `z` with `n < m ≤ M`.
    pub quotient_bound: BigRational,
    /// `truncated_sup < lower_bound` and `boundary_term < 1`.
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakingReport {
    pub rows: Vec<PeakingRow>,
    pub first_passing: Option<u64>,
    pub z_radius: u32,
    pub max_level: u64,
    pub r_est: f64,
    pub caveat: &'static str,
}

pub const PEAKING_CAVEAT: &str = "suprema are over the truncated region |z| ≤ radius, m ≤ M; \
the boundary term stands in for points beyond it, but a supremum escaping both cannot be excluded";

/// For each candidate `n`, compares the truncated supremum of
/// `K_ST((e,n),(z,m))` over `z ≠ e` with `1/Pⁿ(e,e)` and checks
/// `R_estⁿ·Pⁿ(e,e) < 1`. Candidates above the level cap `M` are skipped:
/// their truncated supremum would range over an empty set.
pub fn peaking_experiment<T>(walk: &mut T, opts: &PeakingOptions) -> Result<PeakingReport, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    let model = walk.measure().model().clone();
    let e = model.identity();
    let n_top = opts.candidates.iter().copied().max().unwrap_or(0);
    let zs = walk.scan_set(opts.z_radius);
    let grid = ReturnGrid::new(walk, zs, opts.max_level.max(n_top))?;
    let e_index = grid.zs.iter().position(|z| *z == e);
    let mut rows = Vec::new();
    for &n in opts.candidates.iter().filter(|&&n| n <= opts.max_level) {
        let pn = match e_index {
            Some(i) => grid.values[i][n as usize].clone(),
            None => walk.prob(&e, n)?,
        };
        if pn.is_zero() {
            continue;
        }
        let lower_bound = pn.recip();
        let (truncated_sup, arg) = grid.sup(n, n..=opts.max_level, |z| *z != e);
        let (quotient_bound, _) = grid.sup(n, n + 1..=opts.max_level, |_| true);
        let boundary_term = opts.r_est.powi(n as i32) * rational_to_f64(&pn);
        rows.push(PeakingRow {
            n,
            verdict: truncated_sup < lower_bound && boundary_term < 1.0,
            lower_bound,
            truncated_sup,
            argsup: arg.map(|(i, m)| (model.format(&grid.zs[i]), m)),
            boundary_term,
            quotient_bound,
        });
    }
    let first_passing = rows.iter().find(|r| r.verdict).map(|r| r.n);
    Ok(PeakingReport {
        rows,
        first_passing,
        z_radius: opts.z_radius,
        max_level: opts.max_level,
        r_est: opts.r_est,
        caveat: PEAKING_CAVEAT,
    })
}

/// Upper bound for `‖q(T⁽ⁿ⁾ₑ,ₑ)‖²` on the truncated region:
/// `sup K_ST((e,n),(z,m))` over scanned `z` and `n < m ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientBound {
    pub n: u64,
    pub bound: BigRational,
    pub argmax: Option<(String, u64)>,
    pub boundary_term: f64,
}

pub fn quotient_norm_upper_bound<T>(
    walk: &mut T,
    n: u64,
    z_radius: u32,
    max_level: u64,
    r_est: f64,
) -> Result<QuotientBound, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    let model = walk.measure().model().clone();
    let zs = walk.scan_set(z_radius);
    let grid = ReturnGrid::new(walk, zs, max_level.max(n))?;
    let (bound, arg) = grid.sup(n, n + 1..=max_level, |_| true);
    let pn = walk.prob(&model.identity(), n)?;
    Ok(QuotientBound {
        n,
        bound,
        argmax: arg.map(|(i, m)| (model.format(&grid.zs[i]), m)),
        boundary_term: r_est.powi(n as i32) * rational_to_f64(&pn),
    })
}

/// Comparison of `π_z(T T*)` with `K_ST` for `T = T⁽ⁿ⁾ₑ,ₑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalIdentity {
    pub n: u64,
    pub targets: usize,
    pub entries_checked: usize,
    /// `TT*` and `T*T` are diagonal on every block.
    pub diagonal: bool,
    /// Every `TT*` diagonal entry at `e^{(m)}_{e,z}` equals `K_ST((e,n),(z,m))` exactly.
    pub holds: bool,
    pub mismatch: Option<String>,
}

/// Builds `T⁽ⁿ⁾ₑ,ₑ` on `ℓ²(ST_z)` truncated at `M` for every `z` in the
/// scan set of radius `z_radius`, and checks the squared diagonal of `TT*`
/// against `K_ST((e,n),(z,m))` from the kernel code.
pub fn diagonal_identity_check<T>(
    walk: &mut T,
    n: u64,
    z_radius: u32,
    max_level: u64,
) -> Result<DiagonalIdentity, FockError>
where
    T: Transitions<BigRational> + ?Sized,
{
    use crate::kernel::{space_time_batch, SpaceTimePoint};
    let model = walk.measure().model().clone();
    let e = model.identity();
    let zs = walk.scan_set(z_radius);
    let mut out = DiagonalIdentity {
        n,
        targets: zs.len(),
        entries_checked: 0,
        diagonal: true,
        holds: true,
        mismatch: None,
    };
    for z in &zs {
        let basis = enumerate_basis(walk, z, max_level, BASIS_BUDGET)?;
        let space = FockSpace::single(basis);
        let t = build_t(walk, n, &e, &e, &space)?;
        let tt = t.matmul(&t.adjoint())?;
        let t_t = t.adjoint().matmul(&t)?;
        out.diagonal &= tt.is_diagonal() && t_t.is_diagonal();
        let levels: Vec<u64> = (0..=max_level).filter(|&m| space.bases[0].position(&e, m).is_some()).collect();
        let pairs: Vec<_> = levels
            .iter()
            .map(|&m| (SpaceTimePoint::new_unchecked(e.clone(), n), SpaceTimePoint::new_unchecked(z.clone(), m)))
            .collect();
        let kernels = space_time_batch::<BigRational, T>(walk, &pairs)?;
        for (&m, k) in levels.iter().zip(kernels) {
            let i = space.bases[0].position(&e, m).expect("level present");
            let d = tt.get(i, i);
            out.entries_checked += 1;
            // A diagonal entry of TT* is itself a squared coefficient.
            if d.square() != Some(&(&k * &k)) || d.value() < 0.0 {
                out.holds = false;
                out.mismatch.get_or_insert_with(|| {
                    format!("z={} m={m}: {d} vs {k}", model.format(z))
                });
            }
        }
    }
    Ok(out)
}

/// `e^{(m)}_{x,z}` as display text.
pub fn describe_vector(model: &GroupModel, space: &FockSpace, i: usize) -> String {
    let (z, x, m) = space.vector(i);
    format!("e^({m})_({},{})", model.format(x), model.format(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::PowerCache;
    use crate::measure::Measure;
    use crate::scalar::ratio;

    fn z_lazy() -> PowerCache<BigRational> {
        let mu = Measure::lazy_simple(GroupModel::free_abelian(1).unwrap(), ratio(1, 2)).unwrap();
        PowerCache::new(mu, ()).unwrap()
    }

    fn int(k: i64) -> GroupElement {
        GroupElement::integer(k)
    }

    #[test]
    fn basis_on_z() {
        let mut w = z_lazy();
        let b = enumerate_basis(&mut w, &int(0), 2, BASIS_BUDGET).unwrap();
        let labels: Vec<(i64, u64)> = b
            .vectors()
            .iter()
            .map(|(x, m)| (w.measure().model().format(x).parse().unwrap(), *m))
            .collect();
        assert_eq!(labels.len(), 9);
        for want in [(0, 0), (0, 1), (1, 1), (-1, 1), (0, 2), (1, 2), (-1, 2), (2, 2), (-2, 2)] {
            assert!(labels.contains(&want), "{want:?}");
        }
        let single = enumerate_basis(&mut w, &int(3), 0, BASIS_BUDGET).unwrap();
        assert_eq!(single.vectors(), &[(int(3), 0)]);
        assert!(matches!(enumerate_basis(&mut w, &int(0), 3, 5), Err(FockError::Budget(5))));
    }

    #[test]
    fn shift_operators_on_z() {
        let mut w = z_lazy();
        let space = FockSpace::new(vec![
            enumerate_basis(&mut w, &int(0), 6, BASIS_BUDGET).unwrap(),
            enumerate_basis(&mut w, &int(2), 6, BASIS_BUDGET).unwrap(),
        ]);
        let s = build_s(&mut w, 1, &int(0), &int(1), &space).unwrap();
        assert!(s.compressed > 0);
        for (_, _, v) in s.entries() {
            assert!(*v.square().unwrap() <= ratio(1, 1));
        }
        let t = build_t(&mut w, 1, &int(0), &int(1), &space).unwrap();
        let pn = ratio(1, 4);
        for (r, c, v) in t.entries() {
            assert_eq!(v.square().unwrap() * &pn, s.get(r, c).square().unwrap().clone());
        }
        let s0 = build_s(&mut w, 0, &int(1), &int(1), &space).unwrap();
        let q = build_q(3, &int(1), &space);
        assert_eq!(s0.matmul(&build_q(3, &int(1), &space)).unwrap(), q.clone());
        assert!(s0.is_diagonal() && s0.entries().all(|(_, _, v)| *v == Entry::one()));
        assert_eq!(q.matmul(&build_q(2, &int(1), &space)).unwrap().nnz(), 0);
        assert_eq!(q.matmul(&q).unwrap(), q);
        assert!(build_s(&mut w, 1, &int(0), &int(3), &space).is_err());
    }

    #[test]
    fn return_operator_diagonal_at_origin() {
        let mut w = z_lazy();
        let e = int(0);
        let space = FockSpace::single(enumerate_basis(&mut w, &e, 5, BASIS_BUDGET).unwrap());
        let t = build_t(&mut w, 2, &e, &e, &space).unwrap();
        let t_t = t.adjoint().matmul(&t).unwrap();
        assert!(t_t.is_diagonal());
        let i = space.position(&e, 0, &e).unwrap();
        // 1/P²(0,0) = 8/3
        assert_eq!(t_t.get(i, i).square(), Some(&ratio(64, 9)));
        assert_eq!(t_t.get(i, i).value(), 8.0 / 3.0);
    }

    #[test]
    fn diagonal_identity_on_z() {
        let mut w = z_lazy();
        let d = diagonal_identity_check(&mut w, 2, 4, 6).unwrap();
        assert!(d.diagonal && d.holds, "{:?}", d.mismatch);
        assert_eq!(d.targets, 9);
    }

    #[test]
    fn translation_conjugation_on_z() {
        let mut w = z_lazy();
        let src = enumerate_basis(&mut w, &int(0), 5, BASIS_BUDGET).unwrap();
        let dst = enumerate_basis(&mut w, &int(-1), 5, BASIS_BUDGET).unwrap();
        let c = conjugate_by_unitary(&mut w, &int(1), 1, &int(0), &int(1), &src, &dst, 0.0).unwrap();
        assert!(c.matches && c.compared > 0);
        assert!(conjugate_by_unitary(&mut w, &int(2), 1, &int(0), &int(1), &src, &dst, 0.0).is_err());
    }

    #[test]
    fn operator_norms() {
        let mut d = SparseOperator::zero(3);
        d.set(0, 0, Entry::from_rational(&ratio(1, 2)));
        d.set(1, 1, Entry::from_rational(&ratio(-3, 1)));
        d.set(2, 2, Entry::from_rational(&ratio(2, 1)));
        assert!((operator_norm(&d, 1e-12, NORM_ITERATIONS).unwrap() - 3.0).abs() < 1e-5);
        let mut p = SparseOperator::zero(4);
        p.set(2, 2, Entry::one());
        assert!((operator_norm(&p, 1e-12, NORM_ITERATIONS).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entry_arithmetic() {
        let a = Entry::sqrt_of(ratio(2, 1));
        assert_eq!(a.times(&a), Entry::from_rational(&ratio(2, 1)));
        assert_eq!(a.plus(&a), Entry::sqrt_of(ratio(8, 1)));
        assert!(a.plus(&Entry::from_rational(&ratio(-1, 1)).times(&a)).is_zero());
        let b = a.plus(&Entry::one());
        assert!(matches!(b, Entry::Float(_)));
        assert!((b.value() - (2f64.sqrt() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn peaking_on_z_small() {
        let mut w = z_lazy();
        let opts = PeakingOptions {
            candidates: vec![1, 2],
            z_radius: 10,
            max_level: 10,
            r_est: 1.0,
        };
        let r = peaking_experiment(&mut w, &opts).unwrap();
        assert_eq!(r.first_passing, Some(1));
        assert_eq!(r.rows[0].lower_bound, ratio(2, 1));
        let q = quotient_norm_upper_bound(&mut w, 2, 10, 10, 1.0).unwrap();
        assert_eq!(q.bound, r.rows[1].quotient_bound);
    }
}
