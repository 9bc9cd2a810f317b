//! Group models with canonical element forms, and the word norm `|·|_μ`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::measure::Measure;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("element {element} does not belong to {model}")]
    ModelMismatch { element: String, model: String },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("free rank {0} exceeds the supported maximum of 25")]
    RankTooLarge(usize),
    #[error("invalid multiplication table: {0}")]
    InvalidTable(String),
    #[error("cannot parse {text:?} as an element of {model}: {reason}")]
    Parse {
        text: String,
        model: String,
        reason: String,
    },
    #[error("malformed element encoding")]
    Decode,
    #[error("{element} has norm beyond the table radius {radius}")]
    OutOfRadius { element: String, radius: u32 },
}

/// Letters used for free generators; `e` is reserved for the identity.
const LETTERS: &[u8] = b"abcdfghijklmnopqrstuvwxyz";
const MAX_FREE_RANK: usize = 25;

/// A finite group given by its Cayley table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    labels: Vec<String>,
    table: Vec<u32>,
    identity: u32,
    inverses: Vec<u32>,
}

impl FiniteGroup {
    /// Validates the group axioms. Associativity is checked on every triple
    /// for `|G| ≤ 64` and on 10⁴ seeded random triples above that.
    pub fn new(labels: Vec<String>, table: Vec<Vec<u32>>, identity: u32) -> Result<Self, GroupError> {
        let n = labels.len();
        if n == 0 {
            return Err(GroupError::InvalidTable("empty group".into()));
        }
        if table.len() != n || table.iter().any(|row| row.len() != n) {
            return Err(GroupError::InvalidTable(format!("table must be {n}×{n}")));
        }
        if (identity as usize) >= n {
            return Err(GroupError::InvalidTable("identity index out of range".into()));
        }
        let mut seen = FxHashMap::default();
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() || label.contains(['(', ')', ',', ' ']) {
                return Err(GroupError::InvalidTable(format!("bad label {label:?}")));
            }
            if seen.insert(label.clone(), i).is_some() {
                return Err(GroupError::InvalidTable(format!("duplicate label {label:?}")));
            }
        }
        let flat: Vec<u32> = table.into_iter().flatten().collect();
        if flat.iter().any(|&v| (v as usize) >= n) {
            return Err(GroupError::InvalidTable("entry out of range".into()));
        }
        let at = |a: usize, b: usize| flat[a * n + b] as usize;
        let id = identity as usize;
        for a in 0..n {
            if at(id, a) != a || at(a, id) != a {
                return Err(GroupError::InvalidTable(format!(
                    "identity law fails at {}",
                    labels[a]
                )));
            }
        }
        let mut inverses = Vec::with_capacity(n);
        for a in 0..n {
            match (0..n).find(|&b| at(a, b) == id && at(b, a) == id) {
                Some(b) => inverses.push(b as u32),
                None => {
                    return Err(GroupError::InvalidTable(format!(
                        "{} has no inverse",
                        labels[a]
                    )))
                }
            }
        }
        let assoc = |a: usize, b: usize, c: usize| at(at(a, b), c) == at(a, at(b, c));
        if n <= 64 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if !assoc(a, b, c) {
                            return Err(GroupError::InvalidTable("not associative".into()));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..10_000 {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if !assoc(a, b, c) {
                    return Err(GroupError::InvalidTable("not associative".into()));
                }
            }
        }
        Ok(FiniteGroup {
            labels,
            table: flat,
            identity,
            inverses,
        })
    }

    pub fn cyclic(k: u32) -> Result<Self, GroupError> {
        if k == 0 {
            return Err(GroupError::ZeroRank);
        }
        let labels = (0..k).map(|i| i.to_string()).collect();
        let table = (0..k)
            .map(|a| (0..k).map(|b| (a + b) % k).collect())
            .collect();
        FiniteGroup::new(labels, table, 0)
    }

    /// The symmetric group on `k ≤ 5` points; labels are one-line notation.
    pub fn symmetric(k: usize) -> Result<Self, GroupError> {
        if k == 0 || k > 5 {
            return Err(GroupError::InvalidTable("symmetric groups need 1 ≤ k ≤ 5".into()));
        }
        let mut perms: Vec<Vec<u8>> = vec![(0..k as u8).collect()];
        // Lexicographic enumeration, identity first.
        loop {
            let mut p = perms.last().unwrap().clone();
            let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
                break;
            };
            let j = (i + 1..k).rev().find(|&j| p[j] > p[i]).unwrap();
            p.swap(i, j);
            p[i + 1..].reverse();
            perms.push(p);
        }
        let index: FxHashMap<Vec<u8>, u32> =
            perms.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let labels = perms
            .iter()
            .map(|p| p.iter().map(|d| char::from(b'1' + d)).collect())
            .collect();
        // (p·q)(i) = p(q(i)): apply q first.
        let table = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| index[&q.iter().map(|&i| p[i as usize]).collect::<Vec<_>>()])
                    .collect()
            })
            .collect();
        FiniteGroup::new(labels, table, 0)
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn identity(&self) -> u32 {
        self.identity
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        self.table[a as usize * self.labels.len() + b as usize]
    }

    fn inv(&self, a: u32) -> u32 {
        self.inverses[a as usize]
    }
}

/// A finitely generated group with a built-in normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupModel {
    FreeAbelian { rank: usize },
    Free { rank: usize },
    Finite(Arc<FiniteGroup>),
    DirectProduct(Box<GroupModel>, Box<GroupModel>),
}

/// Freely reduced word: letter `i+1` is generator `i`, `-(i+1)` its inverse.
pub type Word = SmallVec<[i8; 16]>;

/// Canonical element of a [`GroupModel`]. Equal elements have equal
/// representations, so derived equality and hashing are group equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Abelian(SmallVec<[i64; 2]>),
    Word(Word),
    Finite(u32),
    Pair(Box<(GroupElement, GroupElement)>),
}

impl GroupElement {
    pub fn pair(left: GroupElement, right: GroupElement) -> Self {
        GroupElement::Pair(Box::new((left, right)))
    }

    pub fn integer(k: i64) -> Self {
        GroupElement::Abelian(SmallVec::from_slice(&[k]))
    }

    /// Canonical byte encoding; byte equality is element equality.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            GroupElement::Abelian(v) => {
                out.push(1);
                out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            GroupElement::Word(w) => {
                out.push(2);
                out.extend_from_slice(&(w.len() as u32).to_le_bytes());
                out.extend(w.iter().map(|&l| l as u8));
            }
            GroupElement::Finite(i) => {
                out.push(3);
                out.extend_from_slice(&i.to_le_bytes());
            }
            GroupElement::Pair(p) => {
                out.push(4);
                p.0.encode_into(out);
                p.1.encode_into(out);
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, GroupError> {
        let (element, rest) = Self::decode_prefix(bytes)?;
        if rest.is_empty() {
            Ok(element)
        } else {
            Err(GroupError::Decode)
        }
    }

    fn decode_prefix(bytes: &[u8]) -> Result<(Self, &[u8]), GroupError> {
        let (&tag, rest) = bytes.split_first().ok_or(GroupError::Decode)?;
        let take_u32 = |b: &[u8]| -> Result<(u32, usize), GroupError> {
            let head: [u8; 4] = b.get(..4).ok_or(GroupError::Decode)?.try_into().unwrap();
            Ok((u32::from_le_bytes(head), 4))
        };
        match tag {
            1 => {
                let (len, off) = take_u32(rest)?;
                let len = len as usize;
                let body = rest.get(off..off + 8 * len).ok_or(GroupError::Decode)?;
                let v = body
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Ok((GroupElement::Abelian(v), &rest[off + 8 * len..]))
            }
            2 => {
                let (len, off) = take_u32(rest)?;
                let len = len as usize;
                let body = rest.get(off..off + len).ok_or(GroupError::Decode)?;
                let w: Word = body.iter().map(|&b| b as i8).collect();
                if w.contains(&0) || w.windows(2).any(|p| p[0] == -p[1]) {
                    return Err(GroupError::Decode);
                }
                Ok((GroupElement::Word(w), &rest[off + len..]))
            }
            3 => {
                let (i, off) = take_u32(rest)?;
                Ok((GroupElement::Finite(i), &rest[off..]))
            }
            4 => {
                let (l, rest) = Self::decode_prefix(rest)?;
                let (r, rest) = Self::decode_prefix(rest)?;
                Ok((GroupElement::pair(l, r), rest))
            }
            _ => Err(GroupError::Decode),
        }
    }
}

impl GroupModel {
    pub fn free_abelian(rank: usize) -> Result<Self, GroupError> {
        if rank == 0 {
            return Err(GroupError::ZeroRank);
        }
        Ok(GroupModel::FreeAbelian { rank })
    }

    pub fn free(rank: usize) -> Result<Self, GroupError> {
        if rank == 0 {
            return Err(GroupError::ZeroRank);
        }
        if rank > MAX_FREE_RANK {
            return Err(GroupError::RankTooLarge(rank));
        }
        Ok(GroupModel::Free { rank })
    }

    pub fn finite(group: FiniteGroup) -> Self {
        GroupModel::Finite(Arc::new(group))
    }

    pub fn cyclic(k: u32) -> Result<Self, GroupError> {
        Ok(GroupModel::finite(FiniteGroup::cyclic(k)?))
    }

    pub fn product(left: GroupModel, right: GroupModel) -> Self {
        GroupModel::DirectProduct(Box::new(left), Box::new(right))
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupModel::FreeAbelian { rank } => GroupElement::Abelian(SmallVec::from_elem(0, *rank)),
            GroupModel::Free { .. } => GroupElement::Word(Word::new()),
            GroupModel::Finite(g) => GroupElement::Finite(g.identity),
            GroupModel::DirectProduct(l, r) => GroupElement::pair(l.identity(), r.identity()),
        }
    }

    pub fn contains(&self, a: &GroupElement) -> bool {
        match (self, a) {
            (GroupModel::FreeAbelian { rank }, GroupElement::Abelian(v)) => v.len() == *rank,
            (GroupModel::Free { rank }, GroupElement::Word(w)) => {
                let r = *rank as i8;
                w.iter().all(|&l| l != 0 && l.abs() <= r)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupModel::Finite(g), GroupElement::Finite(i)) => (*i as usize) < g.order(),
            (GroupModel::DirectProduct(l, r), GroupElement::Pair(p)) => {
                l.contains(&p.0) && r.contains(&p.1)
            }
            _ => false,
        }
    }

    fn mismatch(&self, a: &GroupElement) -> GroupError {
        GroupError::ModelMismatch {
            element: format!("{a:?}"),
            model: self.to_string(),
        }
    }

    /// Canonical product `a·b`; free words are reduced eagerly.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        match (self, a, b) {
            (GroupModel::FreeAbelian { rank }, GroupElement::Abelian(x), GroupElement::Abelian(y))
                if x.len() == *rank && y.len() == *rank =>
            {
                Ok(GroupElement::Abelian(
                    x.iter().zip(y).map(|(p, q)| p + q).collect(),
                ))
            }
            (GroupModel::Free { .. }, GroupElement::Word(x), GroupElement::Word(y)) => {
                let cancel = x
                    .iter()
                    .rev()
                    .zip(y.iter())
                    .take_while(|(p, q)| **p == -**q)
                    .count();
                let mut w: Word = Word::with_capacity(x.len() + y.len() - 2 * cancel);
                w.extend_from_slice(&x[..x.len() - cancel]);
                w.extend_from_slice(&y[cancel..]);
                Ok(GroupElement::Word(w))
            }
            (GroupModel::Finite(g), GroupElement::Finite(x), GroupElement::Finite(y))
                if (*x as usize) < g.order() && (*y as usize) < g.order() =>
            {
                Ok(GroupElement::Finite(g.mul(*x, *y)))
            }
            (GroupModel::DirectProduct(l, r), GroupElement::Pair(x), GroupElement::Pair(y)) => Ok(
                GroupElement::pair(l.mul(&x.0, &y.0)?, r.mul(&x.1, &y.1)?),
            ),
            (_, a, b) => Err(if self.contains(a) {
                self.mismatch(b)
            } else {
                self.mismatch(a)
            }),
        }
    }

    pub fn inv(&self, a: &GroupElement) -> Result<GroupElement, GroupError> {
        match (self, a) {
            (GroupModel::FreeAbelian { rank }, GroupElement::Abelian(x)) if x.len() == *rank => {
                Ok(GroupElement::Abelian(x.iter().map(|c| -c).collect()))
            }
            (GroupModel::Free { .. }, GroupElement::Word(w)) => {
                Ok(GroupElement::Word(w.iter().rev().map(|l| -l).collect()))
            }
            (GroupModel::Finite(g), GroupElement::Finite(x)) if (*x as usize) < g.order() => {
                Ok(GroupElement::Finite(g.inv(*x)))
            }
            (GroupModel::DirectProduct(l, r), GroupElement::Pair(p)) => {
                Ok(GroupElement::pair(l.inv(&p.0)?, r.inv(&p.1)?))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    /// `x⁻¹·y`.
    pub fn between(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement, GroupError> {
        self.mul(&self.inv(x)?, y)
    }

    /// Standard generating set (inverses not included).
    pub fn generators(&self) -> Vec<GroupElement> {
        match self {
            GroupModel::FreeAbelian { rank } => (0..*rank)
                .map(|i| {
                    let mut v = SmallVec::from_elem(0, *rank);
                    v[i] = 1;
                    GroupElement::Abelian(v)
                })
                .collect(),
            GroupModel::Free { rank } => (1..=*rank as i8)
                .map(|l| GroupElement::Word(Word::from_slice(&[l])))
                .collect(),
            GroupModel::Finite(g) => (0..g.order() as u32)
                .filter(|&i| i != g.identity)
                .map(GroupElement::Finite)
                .collect(),
            GroupModel::DirectProduct(l, r) => {
                let (le, re) = (l.identity(), r.identity());
                l.generators()
                    .into_iter()
                    .map(|g| GroupElement::pair(g, re.clone()))
                    .chain(r.generators().into_iter().map(|g| GroupElement::pair(le.clone(), g)))
                    .collect()
            }
        }
    }

    /// Standard generators together with their inverses, without duplicates.
    pub fn symmetric_generators(&self) -> Vec<GroupElement> {
        let mut out: Vec<GroupElement> = Vec::new();
        for g in self.generators() {
            let inv = self.inv(&g).expect("generator belongs to its model");
            for h in [g, inv] {
                if !out.contains(&h) {
                    out.push(h);
                }
            }
        }
        out
    }

    /// Length of a free word (the `Free` model's word metric).
    pub fn free_length(&self, a: &GroupElement) -> Option<usize> {
        match (self, a) {
            (GroupModel::Free { .. }, GroupElement::Word(w)) => Some(w.len()),
            _ => None,
        }
    }

    /// Human-readable form, inverse of [`GroupModel::parse`].
    pub fn format(&self, a: &GroupElement) -> String {
        match (self, a) {
            (GroupModel::FreeAbelian { rank: 1 }, GroupElement::Abelian(v)) => v[0].to_string(),
            (GroupModel::FreeAbelian { .. }, GroupElement::Abelian(v)) => {
                let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                format!("[{}]", parts.join(","))
            }
            (GroupModel::Free { .. }, GroupElement::Word(w)) => {
                if w.is_empty() {
                    return "e".into();
                }
                w.iter()
                    .map(|&l| {
                        let c = char::from(LETTERS[l.unsigned_abs() as usize - 1]);
                        if l < 0 {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect()
            }
            (GroupModel::Finite(g), GroupElement::Finite(i)) => g
                .labels
                .get(*i as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{i}")),
            (GroupModel::DirectProduct(l, r), GroupElement::Pair(p)) => {
                format!("({},{})", l.format(&p.0), r.format(&p.1))
            }
            _ => format!("{a:?}"),
        }
    }

    /// Parses an element. Free words use `a b c d f …` with uppercase for
    /// inverses and `e` for the identity; products are written `(left,right)`.
    pub fn parse(&self, text: &str) -> Result<GroupElement, GroupError> {
        let fail = |reason: &str| GroupError::Parse {
            text: text.to_string(),
            model: self.to_string(),
            reason: reason.to_string(),
        };
        let t = text.trim();
        match self {
            GroupModel::FreeAbelian { rank } => {
                let body = if *rank == 1 && !t.starts_with('[') {
                    t
                } else {
                    t.strip_prefix('[')
                        .and_then(|s| s.strip_suffix(']'))
                        .ok_or_else(|| fail("expected [c1,…,cd]"))?
                };
                let v: SmallVec<[i64; 2]> = body
                    .split(',')
                    .map(|c| c.trim().parse::<i64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| fail("expected integers"))?;
                if v.len() != *rank {
                    return Err(fail("wrong number of coordinates"));
                }
                Ok(GroupElement::Abelian(v))
            }
            GroupModel::Free { rank } => {
                if t == "e" || t.is_empty() {
                    return Ok(self.identity());
                }
                let mut acc = self.identity();
                for c in t.chars() {
                    let lower = c.to_ascii_lowercase();
                    let pos = LETTERS
                        .iter()
                        .position(|&l| char::from(l) == lower)
                        .filter(|&p| p < *rank)
                        .ok_or_else(|| fail("unknown generator letter"))?;
                    let letter = (pos + 1) as i8;
                    let letter = if c.is_ascii_uppercase() { -letter } else { letter };
                    acc = self.mul(&acc, &GroupElement::Word(Word::from_slice(&[letter])))?;
                }
                Ok(acc)
            }
            GroupModel::Finite(g) => g
                .labels
                .iter()
                .position(|l| l == t)
                .map(|i| GroupElement::Finite(i as u32))
                .ok_or_else(|| fail("unknown label")),
            GroupModel::DirectProduct(l, r) => {
                let inner = t
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| fail("expected (left,right)"))?;
                let mut depth = 0i32;
                let split = inner
                    .char_indices()
                    .find(|&(_, c)| {
                        match c {
                            '(' | '[' => depth += 1,
                            ')' | ']' => depth -= 1,
                            _ => {}
                        }
                        c == ',' && depth == 0
                    })
                    .map(|(i, _)| i)
                    .ok_or_else(|| fail("missing top-level comma"))?;
                Ok(GroupElement::pair(
                    l.parse(&inner[..split])?,
                    r.parse(&inner[split + 1..])?,
                ))
            }
        }
    }

    /// Stable descriptor bytes, used in measure fingerprints.
    pub fn descriptor(&self) -> String {
        match self {
            GroupModel::FreeAbelian { rank } => format!("abelian:{rank}"),
            GroupModel::Free { rank } => format!("free:{rank}"),
            GroupModel::Finite(g) => {
                let table: Vec<String> = g.table.iter().map(|v| v.to_string()).collect();
                format!(
                    "table:{}:{}:{}",
                    g.labels.join("|"),
                    g.identity,
                    table.join(",")
                )
            }
            GroupModel::DirectProduct(l, r) => format!("product({};{})", l.descriptor(), r.descriptor()),
        }
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupModel::FreeAbelian { rank } => write!(f, "Z^{rank}"),
            GroupModel::Free { rank } => write!(f, "F{rank}"),
            GroupModel::Finite(g) => write!(f, "G{}", g.order()),
            GroupModel::DirectProduct(l, r) => write!(f, "{l} x {r}"),
        }
    }
}

/// Word norm `|x|_μ = min{n : Pⁿ(e,x) > 0}` on a ball, from a forward BFS
/// over right multiplication by `supp(μ)`.
#[derive(Debug, Clone)]
pub struct WordNormTable {
    model: GroupModel,
    fingerprint: [u8; 32],
    radius: u32,
    /// element → (norm, BFS index)
    norms: FxHashMap<GroupElement, (u32, usize)>,
    order: Vec<GroupElement>,
    layer_starts: Vec<usize>,
}

impl WordNormTable {
    pub fn new(mu: &Measure, radius: u32) -> Self {
        let model = mu.model().clone();
        let steps: Vec<&GroupElement> = mu.atoms().iter().map(|(g, _)| g).collect();
        let e = model.identity();
        let mut norms = FxHashMap::default();
        norms.insert(e.clone(), (0, 0));
        let mut order = vec![e.clone()];
        let mut layer_starts = vec![0];
        let mut queue = VecDeque::from([(e, 0u32)]);
        while let Some((x, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for s in &steps {
                let y = model.mul(&x, s).expect("support belongs to the model");
                if !norms.contains_key(&y) {
                    norms.insert(y.clone(), (d + 1, order.len()));
                    if layer_starts.len() <= (d + 1) as usize {
                        layer_starts.push(order.len());
                    }
                    order.push(y.clone());
                    queue.push_back((y, d + 1));
                }
            }
        }
        WordNormTable {
            model,
            fingerprint: mu.fingerprint(),
            radius,
            norms,
            order,
            layer_starts,
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    /// Fingerprint of the measure that produced the table.
    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    pub fn norm(&self, x: &GroupElement) -> Option<u32> {
        self.norms.get(x).map(|&(n, _)| n)
    }

    fn norm_or_err(&self, x: &GroupElement) -> Result<u32, GroupError> {
        self.norm(x).ok_or_else(|| GroupError::OutOfRadius {
            element: self.model.format(x),
            radius: self.radius,
        })
    }

    /// Ball in BFS order (`e` first, spheres in increasing radius).
    pub fn elements(&self) -> &[GroupElement] {
        &self.order
    }

    /// Position of `x` in the BFS order.
    pub fn bfs_index(&self, x: &GroupElement) -> Option<usize> {
        self.norms.get(x).map(|&(_, i)| i)
    }

    /// Sphere `S_n` in BFS order; empty beyond the radius.
    pub fn sphere(&self, n: u32) -> &[GroupElement] {
        let Some(&start) = self.layer_starts.get(n as usize) else {
            return &[];
        };
        let end = self
            .layer_starts
            .get(n as usize + 1)
            .copied()
            .unwrap_or(self.order.len());
        &self.order[start..end]
    }

    /// Ball of radius `r ≤ radius` in BFS order.
    pub fn ball(&self, r: u32) -> &[GroupElement] {
        let end = self
            .layer_starts
            .get(r as usize + 1)
            .copied()
            .unwrap_or(self.order.len());
        &self.order[..end]
    }

    /// `|x| + |x⁻¹y| = |y|`. Requires `|x|` and `|y|` in the table; when `x⁻¹y`
    /// lies outside the ball its norm exceeds the radius, which already
    /// decides the answer as long as `|y| − |x| ≤ radius`.
    pub fn is_aligned(&self, x: &GroupElement, y: &GroupElement) -> Result<bool, GroupError> {
        let nx = self.norm_or_err(x)?;
        let ny = self.norm_or_err(y)?;
        if nx > ny {
            return Ok(false);
        }
        let between = self.model.between(x, y)?;
        match self.norm(&between) {
            Some(d) => Ok(nx + d == ny),
            None => Ok(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupModel {
        GroupModel::free(2).unwrap()
    }

    #[test]
    fn free_reduction_and_inverse() {
        let g = f2();
        let a = g.parse("a").unwrap();
        let ai = g.parse("A").unwrap();
        assert_eq!(g.mul(&a, &ai).unwrap(), g.identity());
        assert_eq!(g.parse("abBA").unwrap(), g.identity());
        let ab = g.parse("ab").unwrap();
        assert_eq!(g.format(&g.inv(&ab).unwrap()), "BA");
        assert_eq!(g.format(&g.identity()), "e");
    }

    #[test]
    fn product_multiplication() {
        let g = GroupModel::product(f2(), GroupModel::cyclic(2).unwrap());
        let x = g.parse("(ab,0)").unwrap();
        let y = g.parse("(a,1)").unwrap();
        assert_eq!(g.format(&g.mul(&x, &y).unwrap()), "(aba,1)");
        let one = GroupModel::cyclic(2).unwrap().parse("1").unwrap();
        assert_eq!(GroupModel::cyclic(2).unwrap().inv(&one).unwrap(), one);
    }

    #[test]
    fn abelian_addition() {
        let g = GroupModel::free_abelian(2).unwrap();
        let s = g.mul(&g.parse("[1,2]").unwrap(), &g.parse("[3,-1]").unwrap()).unwrap();
        assert_eq!(g.format(&s), "[4,1]");
        let z = GroupModel::free_abelian(1).unwrap();
        assert_eq!(z.parse("-3").unwrap(), GroupElement::integer(-3));
    }

    #[test]
    fn mismatch_is_an_error() {
        let g = f2();
        let z = GroupElement::integer(1);
        assert!(matches!(
            g.mul(&g.identity(), &z),
            Err(GroupError::ModelMismatch { .. })
        ));
        assert!(g.inv(&z).is_err());
    }

    #[test]
    fn encoding_round_trip() {
        let g = GroupModel::product(
            GroupModel::product(f2(), GroupModel::free_abelian(2).unwrap()),
            GroupModel::cyclic(3).unwrap(),
        );
        let x = g.parse("((aBB,[3,-4]),2)").unwrap();
        let bytes = x.encode();
        assert_eq!(GroupElement::decode(&bytes).unwrap(), x);
        assert_eq!(g.format(&x), "((aBB,[3,-4]),2)");
        assert!(GroupElement::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(GroupElement::decode(&[2, 2, 0, 0, 0, 1, 0xff]).is_err());
    }

    #[test]
    fn finite_tables_are_validated() {
        assert!(FiniteGroup::new(
            vec!["0".into(), "1".into()],
            vec![vec![0, 1], vec![1, 1]],
            0
        )
        .is_err());
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
        assert_eq!(FiniteGroup::symmetric(5).unwrap().order(), 120);
    }

    #[test]
    fn symmetric_group_is_nonabelian() {
        let g = GroupModel::finite(FiniteGroup::symmetric(3).unwrap());
        let a = g.parse("213").unwrap();
        let b = g.parse("132").unwrap();
        assert_ne!(g.mul(&a, &b).unwrap(), g.mul(&b, &a).unwrap());
    }
}
