//! Convolution powers `μ*ⁿ` and transition probabilities `Pⁿ(x,y) = μ*ⁿ(x⁻¹y)`.
//!
//! [`PowerCache`] computes powers on any built-in group by sparse push-forward
//! over interned element ids. [`RadialFreeWalk`] is the birth–death shortcut
//! for radial measures on free groups, where `μ*ⁿ(g)` only depends on `|g|`.
//! Both implement [`Transitions`], which is what the kernel code consumes.

mod interner;
mod persist;
mod radial;

use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_rational::BigRational;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::group::{GroupElement, GroupError, GroupModel, WordNormTable};
use crate::measure::{Measure, MeasureError};
use crate::report::HarmonicReport;
use crate::scalar::{Scalar, ScalarError};

pub use interner::Interner;
pub use radial::{radial_oracle_free, RadialFreeWalk};

#[derive(Debug, Error)]
pub enum ConvolutionError {
    #[error("atom budget exceeded: {needed} atoms needed, limit {limit}")]
    Budget { needed: usize, limit: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("measure is not radial on a free group: {0}")]
    NotRadial(String),
    #[error("cannot write power cache: {0}")]
    Persist(#[from] std::io::Error),
}

/// Callback of [`Transitions::sweep`].
pub type SweepVisitor<'a, S> = dyn FnMut(u64, &dyn Fn(usize) -> S) -> ControlFlow<()> + 'a;

/// Source of n-step transition probabilities for a fixed measure.
pub trait Transitions<S: Scalar> {
    fn measure(&self) -> &Measure;

    fn context(&self) -> &S::Context;

    /// `μ*ⁿ(g)`.
    fn prob(&mut self, g: &GroupElement, n: u64) -> Result<S, ConvolutionError>;

    /// `Pⁿ(x,y) = μ*ⁿ(x⁻¹y)`.
    fn p_n(&mut self, x: &GroupElement, y: &GroupElement, n: u64) -> Result<S, ConvolutionError> {
        let g = self.measure().model().between(x, y)?;
        self.prob(&g, n)
    }

    /// Streams `μ*ⁿ` for `n = 0, 1, …, n_max` without retaining the powers.
    /// At each `n` the visitor gets a probe `i ↦ μ*ⁿ(targets[i])`, evaluated
    /// on demand, and may stop early.
    fn sweep(
        &mut self,
        targets: &[GroupElement],
        n_max: u64,
        visit: &mut SweepVisitor<'_, S>,
    ) -> Result<(), ConvolutionError>;

    /// `supp(μ*ⁿ)` sorted by canonical encoding.
    fn support(&mut self, n: u64) -> Result<Vec<GroupElement>, ConvolutionError>;

    /// Elements with `|g|_μ ≤ radius`, up to symmetries of every `μ*ⁿ`:
    /// a supremum of any function of `μ*ⁿ(g)` over the ball is a supremum
    /// over this set.
    fn scan_set(&mut self, radius: u32) -> Vec<GroupElement> {
        WordNormTable::new(self.measure(), radius).elements().to_vec()
    }

    /// Representative of `g` in [`Transitions::scan_set`]'s quotient: two
    /// elements with the same key have the same `μ*ⁿ` for every `n`.
    fn orbit_key(&self, g: &GroupElement) -> GroupElement {
        g.clone()
    }
}

/// `μ*ⁿ` as a sparse map, sorted by canonical encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<S: Scalar> {
    pub n: u64,
    entries: Vec<(GroupElement, S)>,
    index: FxHashMap<GroupElement, usize>,
}

impl<S: Scalar> Distribution<S> {
    fn from_entries(n: u64, mut entries: Vec<(GroupElement, S)>) -> Self {
        entries.sort_by_cached_key(|(g, _)| g.encode());
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (g, _))| (g.clone(), i))
            .collect();
        Distribution { n, entries, index }
    }

    pub fn entries(&self) -> &[(GroupElement, S)] {
        &self.entries
    }

    pub fn get(&self, g: &GroupElement) -> Option<&S> {
        self.index.get(g).map(|&i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self, ctx: &S::Context) -> S {
        self.entries
            .iter()
            .fold(S::zero_with(ctx), |acc, (_, v)| acc.plus(v))
    }
}

/// One power: masses on interned ids (sorted by id) and the common scale.
#[derive(Debug)]
struct Layer<S: Scalar> {
    ids: Vec<u32>,
    masses: Vec<S::Mass>,
    scale: S,
}

impl<S: Scalar> Layer<S> {
    fn mass(&self, id: u32) -> Option<&S::Mass> {
        self.ids.binary_search(&id).ok().map(|i| &self.masses[i])
    }

    fn value(&self, id: Option<u32>, ctx: &S::Context) -> S {
        match id.and_then(|id| self.mass(id)) {
            Some(m) => S::from_mass(m, &self.scale),
            None => S::zero_with(ctx),
        }
    }
}

/// Memo of exact convolution powers of one measure.
///
/// Powers live as integer masses on interned ids; a power is extended by one
/// step at a time, summing contributions in (source id, atom index) order so
/// float mode is bit-reproducible. Optionally persisted, one file per `n`.
#[derive(Debug)]
pub struct PowerCache<S: Scalar> {
    measure: Measure,
    ctx: S::Context,
    fingerprint: [u8; 32],
    interner: Interner,
    step_ids: Vec<u32>,
    weights: Vec<S::Weight>,
    unit_scale: S,
    /// `steps[id * k + j]` is the id of `element(id) · atom_j`, for `id < rows`.
    steps: Vec<u32>,
    rows: usize,
    layers: BTreeMap<u64, Arc<Layer<S>>>,
    max_atoms: usize,
    retain_atoms: usize,
    persist_dir: Option<PathBuf>,
}

impl<S: Scalar> PowerCache<S> {
    pub const DEFAULT_MAX_ATOMS: usize = 40_000_000;
    pub const DEFAULT_RETAIN_ATOMS: usize = 4_000_000;

    pub fn new(measure: Measure, ctx: S::Context) -> Result<Self, ConvolutionError> {
        let weights: Vec<BigRational> = measure.atoms().iter().map(|(_, w)| w.clone()).collect();
        let (weights, unit_scale) = S::step_weights(&ctx, &weights)?;
        let mut interner = Interner::new();
        let e = interner.intern(measure.model().identity());
        let step_ids = measure
            .atoms()
            .iter()
            .map(|(g, _)| interner.intern(g.clone()))
            .collect();
        let mut layers = BTreeMap::new();
        layers.insert(
            0,
            Arc::new(Layer {
                ids: vec![e],
                masses: vec![S::mass_unit(&ctx)],
                scale: S::one_with(&ctx),
            }),
        );
        Ok(PowerCache {
            fingerprint: measure.fingerprint(),
            measure,
            ctx,
            interner,
            step_ids,
            weights,
            unit_scale,
            steps: Vec::new(),
            rows: 0,
            layers,
            max_atoms: Self::DEFAULT_MAX_ATOMS,
            retain_atoms: Self::DEFAULT_RETAIN_ATOMS,
            persist_dir: None,
        })
    }

    /// Cap on distinct elements ever touched; exceeding it is an error.
    pub fn with_max_atoms(mut self, max_atoms: usize) -> Self {
        self.max_atoms = max_atoms;
        self
    }

    /// Soft cap on atoms kept in memory across cached powers.
    pub fn with_retention(mut self, retain_atoms: usize) -> Self {
        self.retain_atoms = retain_atoms;
        self
    }

    /// Persist powers under `dir` (rational mode only; ignored for floats).
    pub fn with_persistence(mut self, dir: impl AsRef<Path>) -> Self {
        self.persist_dir = Some(dir.as_ref().to_path_buf());
        self
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    /// Number of distinct elements interned so far.
    pub fn interned(&self) -> usize {
        self.interner.len()
    }

    /// Powers currently held in memory.
    pub fn cached_powers(&self) -> Vec<u64> {
        self.layers.keys().copied().collect()
    }

    /// Drops every in-memory power except `μ*⁰`.
    pub fn clear_memory(&mut self) {
        self.layers.retain(|&n, _| n == 0);
    }

    fn model(&self) -> &GroupModel {
        self.measure.model()
    }

    fn ensure_rows(&mut self, upto: usize) -> Result<(), ConvolutionError> {
        let k = self.step_ids.len();
        while self.rows < upto {
            let x = self.interner.element(self.rows as u32).clone();
            for j in 0..k {
                let s = self.interner.element(self.step_ids[j]);
                let y = self.measure.model().mul(&x, s)?;
                let id = self.interner.intern(y);
                self.steps.push(id);
            }
            self.rows += 1;
            if self.interner.len() > self.max_atoms {
                return Err(ConvolutionError::Budget {
                    needed: self.interner.len(),
                    limit: self.max_atoms,
                });
            }
        }
        Ok(())
    }

    fn step(&mut self, prev: &Layer<S>) -> Result<Layer<S>, ConvolutionError> {
        let upto = prev.ids.last().map_or(0, |&id| id as usize + 1);
        self.ensure_rows(upto)?;
        let k = self.step_ids.len();
        let mut acc: Vec<S::Mass> = vec![S::mass_zero(); self.interner.len()];
        for (&id, mass) in prev.ids.iter().zip(&prev.masses) {
            let row = &self.steps[id as usize * k..(id as usize + 1) * k];
            for (t, w) in row.iter().zip(&self.weights) {
                S::accumulate(&mut acc[*t as usize], mass, w);
            }
        }
        let mut ids = Vec::new();
        let mut masses = Vec::new();
        for (id, m) in acc.into_iter().enumerate() {
            if !S::mass_is_zero(&m) {
                ids.push(id as u32);
                masses.push(m);
            }
        }
        Ok(Layer {
            ids,
            masses,
            scale: prev.scale.times(&self.unit_scale),
        })
    }

    fn cached_atoms(&self) -> usize {
        self.layers.values().map(|l| l.ids.len()).sum()
    }

    fn remember(&mut self, n: u64, layer: Arc<Layer<S>>) {
        self.layers.insert(n, layer);
        while self.cached_atoms() > self.retain_atoms {
            let victim = self.layers.keys().copied().find(|&m| m != 0 && m != n);
            match victim {
                Some(m) => {
                    self.layers.remove(&m);
                }
                None => break,
            }
        }
    }

    fn load(&mut self, n: u64) -> Option<Layer<S>> {
        let dir = self.persist_dir.clone()?;
        if !S::EXACT {
            return None;
        }
        let records = persist::load(&dir, &self.fingerprint, n)?;
        let scale = self.unit_scale.pow_with(&self.ctx, n);
        let mut pairs = Vec::with_capacity(records.len());
        for (enc, q) in records {
            let g = GroupElement::decode(&enc).ok()?;
            if !self.model().contains(&g) {
                return None;
            }
            let mass = S::mass_from_rational(&q, &scale)?;
            if S::mass_is_zero(&mass) {
                return None;
            }
            pairs.push((self.interner.intern(g), mass));
        }
        pairs.sort_by_key(|(id, _)| *id);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        let (ids, masses): (Vec<u32>, Vec<S::Mass>) = pairs.into_iter().unzip();
        let layer = Layer { ids, masses, scale };
        // A file that is internally consistent but not a probability vector is rejected too.
        let total = layer
            .masses
            .iter()
            .fold(S::zero_with(&self.ctx), |acc, m| acc.plus(&S::from_mass(m, &layer.scale)));
        (total == S::one_with(&self.ctx)).then_some(layer)
    }

    fn save(&self, n: u64, layer: &Layer<S>) -> Result<(), ConvolutionError> {
        let Some(dir) = &self.persist_dir else {
            return Ok(());
        };
        let mut records = Vec::with_capacity(layer.ids.len());
        for (&id, m) in layer.ids.iter().zip(&layer.masses) {
            let Some(q) = S::mass_to_rational(m, &layer.scale) else {
                return Ok(());
            };
            records.push((self.interner.element(id).encode(), q));
        }
        records.sort_by(|a, b| a.0.cmp(&b.0));
        persist::save(dir, &self.fingerprint, n, &records)?;
        Ok(())
    }

    fn layer(&mut self, n: u64) -> Result<Arc<Layer<S>>, ConvolutionError> {
        if let Some(l) = self.layers.get(&n) {
            return Ok(l.clone());
        }
        if let Some(l) = self.load(n) {
            let l = Arc::new(l);
            self.remember(n, l.clone());
            return Ok(l);
        }
        let (&start, base) = self
            .layers
            .range(..n)
            .next_back()
            .expect("μ*⁰ is always cached");
        let mut current = base.clone();
        for m in start + 1..=n {
            let next = Arc::new(self.step(&current)?);
            if next.ids.len() > self.max_atoms {
                return Err(ConvolutionError::Budget {
                    needed: next.ids.len(),
                    limit: self.max_atoms,
                });
            }
            self.save(m, &next)?;
            self.remember(m, next.clone());
            current = next;
        }
        Ok(current)
    }

    /// `μ*ⁿ` as a distribution.
    pub fn power(&mut self, n: u64) -> Result<Distribution<S>, ConvolutionError> {
        let layer = self.layer(n)?;
        let entries = layer
            .ids
            .iter()
            .zip(&layer.masses)
            .map(|(&id, m)| (self.interner.element(id).clone(), S::from_mass(m, &layer.scale)))
            .collect();
        Ok(Distribution::from_entries(n, entries))
    }

    /// `Σ_g μ*ⁿ(g)`, from the stored masses.
    pub fn total_mass(&mut self, n: u64) -> Result<S, ConvolutionError> {
        let layer = self.layer(n)?;
        let mut total = S::mass_zero();
        let unit = S::mass_unit(&self.ctx);
        for m in &layer.masses {
            S::accumulate_product(&mut total, m, &unit);
        }
        Ok(S::from_mass(&total, &layer.scale))
    }

    /// Size of `supp(μ*ⁿ)`.
    pub fn support_size(&mut self, n: u64) -> Result<usize, ConvolutionError> {
        Ok(self.layer(n)?.ids.len())
    }

    /// Residual of `Σ_z Pⁿ(e,z)Pᵐ(z,y) = P^{n+m}(e,y)` over every `y` in
    /// either support. Exact rational mode compares integer masses, so a
    /// zero residual is literal equality.
    pub fn chapman_kolmogorov_check(
        &mut self,
        n: u64,
        m: u64,
    ) -> Result<HarmonicReport<S>, ConvolutionError> {
        let a = self.layer(n)?;
        let b = self.layer(m)?;
        let target = self.layer(n + m)?;
        let mut acc: FxHashMap<u32, S::Mass> = FxHashMap::default();
        for (&ia, ma) in a.ids.iter().zip(&a.masses) {
            let x = self.interner.element(ia).clone();
            for (&ib, mb) in b.ids.iter().zip(&b.masses) {
                let y = self.measure.model().mul(&x, self.interner.element(ib))?;
                let id = self.interner.intern(y);
                S::accumulate_product(acc.entry(id).or_insert_with(S::mass_zero), ma, mb);
            }
        }
        let scale = a.scale.times(&b.scale);
        let mut ids: Vec<u32> = acc.keys().copied().chain(target.ids.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        let zero = S::mass_zero();
        let mut report = HarmonicReport::new(&self.ctx);
        for id in ids {
            let lhs = acc.get(&id).unwrap_or(&zero);
            let rhs = target.mass(id).unwrap_or(&zero);
            let residual = mass_residual::<S>(lhs, &scale, rhs, &target.scale, &self.ctx);
            report.record(residual, || self.model().format(self.interner.element(id)));
        }
        Ok(report.finish())
    }

    /// Sphere first-passage identity: for `|y| = L ≤ max_norm` and `n ≤ L`,
    /// `P^L(e,y) = Σ_{x ∈ S_n, aligned(x,y)} Pⁿ(e,x) P^{L−n}(x,y)`.
    pub fn sphere_decomposition_check(
        &mut self,
        table: &WordNormTable,
        max_norm: u32,
    ) -> Result<HarmonicReport<S>, ConvolutionError> {
        let mut report = HarmonicReport::new(&self.ctx);
        let max_norm = max_norm.min(table.radius());
        for total in 0..=max_norm {
            let target = self.layer(u64::from(total))?;
            let sphere_ids: Vec<u32> = table
                .sphere(total)
                .iter()
                .map(|y| self.interner.intern(y.clone()))
                .collect();
            for n in 0..=total {
                let first = self.layer(u64::from(n))?;
                let rest = self.layer(u64::from(total - n))?;
                let mut acc: FxHashMap<u32, S::Mass> = FxHashMap::default();
                for (&ix, mx) in first.ids.iter().zip(&first.masses) {
                    let x = self.interner.element(ix).clone();
                    if table.norm(&x) != Some(n) {
                        continue;
                    }
                    for (&iw, mw) in rest.ids.iter().zip(&rest.masses) {
                        let w = self.interner.element(iw);
                        // x⁻¹y = w, so alignment is n + |w| = L.
                        if table.norm(w).map(|d| d + n) != Some(total) {
                            continue;
                        }
                        let y = self.measure.model().mul(&x, w)?;
                        if table.norm(&y) != Some(total) {
                            continue;
                        }
                        let id = self.interner.intern(y);
                        S::accumulate_product(acc.entry(id).or_insert_with(S::mass_zero), mx, mw);
                    }
                }
                let scale = first.scale.times(&rest.scale);
                let zero = S::mass_zero();
                for &id in &sphere_ids {
                    let lhs = acc.get(&id).unwrap_or(&zero);
                    let rhs = target.mass(id).unwrap_or(&zero);
                    let residual = mass_residual::<S>(lhs, &scale, rhs, &target.scale, &self.ctx);
                    report.record(residual, || {
                        format!("y={} n={n}", self.model().format(self.interner.element(id)))
                    });
                }
            }
        }
        Ok(report.finish())
    }
}

/// `|a·sa − b·sb|`, short-circuiting equal masses under equal scales.
fn mass_residual<S: Scalar>(a: &S::Mass, sa: &S, b: &S::Mass, sb: &S, ctx: &S::Context) -> S {
    if S::EXACT && a == b && sa == sb {
        return S::zero_with(ctx);
    }
    S::from_mass(a, sa).minus(&S::from_mass(b, sb)).abs_value()
}

impl<S: Scalar> Transitions<S> for PowerCache<S> {
    fn measure(&self) -> &Measure {
        &self.measure
    }

    fn context(&self) -> &S::Context {
        &self.ctx
    }

    fn prob(&mut self, g: &GroupElement, n: u64) -> Result<S, ConvolutionError> {
        if !self.model().contains(g) {
            return Err(GroupError::ModelMismatch {
                element: format!("{g:?}"),
                model: self.model().to_string(),
            }
            .into());
        }
        let layer = self.layer(n)?;
        Ok(layer.value(self.interner.lookup(g), &self.ctx))
    }

    fn sweep(
        &mut self,
        targets: &[GroupElement],
        n_max: u64,
        visit: &mut SweepVisitor<'_, S>,
    ) -> Result<(), ConvolutionError> {
        let ids: Vec<u32> = targets
            .iter()
            .map(|g| self.interner.intern(g.clone()))
            .collect();
        let mut current = self.layer(0)?;
        for n in 0..=n_max {
            if n > 0 {
                current = match self.layers.get(&n) {
                    Some(l) => l.clone(),
                    None => Arc::new(self.step(&current)?),
                };
            }
            let layer = &current;
            let ctx = &self.ctx;
            if visit(n, &|i| layer.value(Some(ids[i]), ctx)).is_break() {
                break;
            }
        }
        Ok(())
    }

    fn support(&mut self, n: u64) -> Result<Vec<GroupElement>, ConvolutionError> {
        let layer = self.layer(n)?;
        let mut out: Vec<GroupElement> = layer
            .ids
            .iter()
            .map(|&id| self.interner.element(id).clone())
            .collect();
        out.sort_by_cached_key(|g| g.encode());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, BigFloat, Precision};

    fn z_lazy() -> Measure {
        Measure::lazy_simple(GroupModel::free_abelian(1).unwrap(), ratio(1, 2)).unwrap()
    }

    #[test]
    fn z_lazy_second_power() {
        let mut cache = PowerCache::<BigRational>::new(z_lazy(), ()).unwrap();
        let d = cache.power(2).unwrap();
        assert_eq!(d.get(&GroupElement::integer(0)), Some(&ratio(3, 8)));
        assert_eq!(d.get(&GroupElement::integer(-1)), Some(&ratio(1, 4)));
        assert_eq!(d.get(&GroupElement::integer(2)), Some(&ratio(1, 16)));
        assert_eq!(d.len(), 5);
        let p = cache
            .p_n(&GroupElement::integer(0), &GroupElement::integer(3), 3)
            .unwrap();
        assert_eq!(p, ratio(1, 64));
    }

    #[test]
    fn zeroth_power_is_dirac() {
        let mut cache = PowerCache::<BigRational>::new(z_lazy(), ()).unwrap();
        let d = cache.power(0).unwrap();
        assert_eq!(d.entries(), &[(GroupElement::integer(0), ratio(1, 1))]);
    }

    #[test]
    fn budget_is_a_clean_error() {
        let mu = Measure::simple(GroupModel::free(2).unwrap()).unwrap();
        let mut cache = PowerCache::<BigRational>::new(mu, ()).unwrap().with_max_atoms(100);
        assert!(matches!(cache.power(6), Err(ConvolutionError::Budget { .. })));
    }

    #[test]
    fn sweep_matches_power_and_stops_early() {
        let mut cache = PowerCache::<BigRational>::new(z_lazy(), ()).unwrap();
        let targets = [GroupElement::integer(0), GroupElement::integer(2)];
        let mut seen = Vec::new();
        cache
            .sweep(&targets, 10, &mut |n, v| {
                seen.push((n, vec![v(0), v(1)]));
                if n == 3 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })
            .unwrap();
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[2].1, vec![ratio(3, 8), ratio(1, 16)]);
        assert_eq!(seen[3].1[0], ratio(5, 16));
    }

    #[test]
    fn retention_evicts_but_recomputes() {
        let mut cache = PowerCache::<BigRational>::new(z_lazy(), ()).unwrap().with_retention(30);
        let p10 = cache.prob(&GroupElement::integer(0), 10).unwrap();
        assert!(cache.cached_powers().len() < 11);
        let p3 = cache.prob(&GroupElement::integer(0), 3).unwrap();
        assert_eq!(p3, ratio(5, 16));
        assert_eq!(cache.prob(&GroupElement::integer(0), 10).unwrap(), p10);
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mu = Measure::example_f2c2(ratio(1, 2)).unwrap();
        let mut first = PowerCache::<BigRational>::new(mu.clone(), ())
            .unwrap()
            .with_persistence(dir.path());
        let d = first.power(3).unwrap();
        let mut second = PowerCache::<BigRational>::new(mu, ()).unwrap().with_persistence(dir.path());
        second.layer(3).unwrap();
        // Loaded straight from disk: no intermediate powers were computed.
        assert_eq!(second.cached_powers(), vec![0, 3]);
        assert_eq!(second.power(3).unwrap(), d);
    }

    #[test]
    fn float_mode_tracks_rational_mode() {
        let mu = Measure::example_f2c2(ratio(1, 2)).unwrap();
        let mut exact = PowerCache::<BigRational>::new(mu.clone(), ()).unwrap();
        let mut float = PowerCache::<BigFloat>::new(mu, Precision::from_digits(50).unwrap()).unwrap();
        let e = exact.measure().model().identity();
        let a = exact.prob(&e, 4).unwrap();
        let b = float.prob(&e, 4).unwrap();
        assert!((a.as_f64() - b.as_f64()).abs() < 1e-15);
        let ck = float.chapman_kolmogorov_check(2, 3).unwrap();
        assert!(ck.max_residual.as_f64() < 1e-40);
        assert!(!ck.exact || ck.max_residual.is_zero_value());
    }

    #[test]
    fn chapman_kolmogorov_exact() {
        let mut cache = PowerCache::<BigRational>::new(z_lazy(), ()).unwrap();
        let r = cache.chapman_kolmogorov_check(3, 3).unwrap();
        assert!(r.exact);
        assert_eq!(r.checked, 13);
    }
}
