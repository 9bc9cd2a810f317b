//! Finitely supported probability measures and their truncations.

use std::collections::{HashSet, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{GroupElement, GroupError, GroupModel, WordNormTable};
use crate::scalar::ratio;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("weights sum to {0}, not 1")]
    NotProbability(String),
    #[error("non-positive weight {weight} at {element}")]
    NonPositive { element: String, weight: String },
    #[error("duplicate atom {0}")]
    Duplicate(String),
    #[error("empty support")]
    Empty,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("preset {0} does not apply to group {1}")]
    PresetMismatch(String, String),
    #[error("laziness must lie in [0, 1)")]
    BadLaziness,
}

/// A probability measure with finite support and exact weights.
///
/// Atoms are kept sorted by canonical encoding, which fixes every downstream
/// iteration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measure {
    model: GroupModel,
    atoms: Vec<(GroupElement, BigRational)>,
    lazy: bool,
    symmetric: bool,
}

/// Property flags; admissibility is only ever certified within a radius.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureFlags {
    pub lazy: bool,
    pub symmetric: bool,
    pub radius: u32,
    pub admissible_within_radius: bool,
    /// Elements of the symmetric generator ball that the search did not reach.
    pub unreachable: Vec<GroupElement>,
}

/// `μ̄ₓ`: the atoms `(x·s, μ(s))` that raise the norm by exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedMeasure {
    pub base: GroupElement,
    pub atoms: Vec<(GroupElement, BigRational)>,
    pub deficit: BigRational,
}

impl Measure {
    pub fn new(
        model: GroupModel,
        atoms: Vec<(GroupElement, BigRational)>,
    ) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        let mut seen = HashSet::new();
        let mut total = BigRational::zero();
        for (g, w) in &atoms {
            if !model.contains(g) {
                return Err(GroupError::ModelMismatch {
                    element: format!("{g:?}"),
                    model: model.to_string(),
                }
                .into());
            }
            if !w.is_positive() {
                return Err(MeasureError::NonPositive {
                    element: model.format(g),
                    weight: w.to_string(),
                });
            }
            if !seen.insert(g.clone()) {
                return Err(MeasureError::Duplicate(model.format(g)));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(MeasureError::NotProbability(total.to_string()));
        }
        let mut atoms = atoms;
        atoms.sort_by_cached_key(|(g, _)| g.encode());
        let e = model.identity();
        let lazy = atoms.iter().any(|(g, _)| *g == e);
        let symmetric = atoms.iter().all(|(g, w)| {
            let inv = model.inv(g).expect("atom belongs to model");
            atoms.iter().any(|(h, v)| *h == inv && v == w)
        });
        Ok(Measure {
            model,
            atoms,
            lazy,
            symmetric,
        })
    }

    /// Parses `(element, "p/q")` pairs.
    pub fn from_text(model: GroupModel, atoms: &[(&str, &str)]) -> Result<Self, MeasureError> {
        let parsed = atoms
            .iter()
            .map(|(g, w)| {
                let element = model.parse(g)?;
                let weight = crate::scalar::parse_rational(w).ok_or_else(|| GroupError::Parse {
                    text: w.to_string(),
                    model: "rational weight".into(),
                    reason: "expected p/q".into(),
                })?;
                Ok((element, weight))
            })
            .collect::<Result<Vec<_>, MeasureError>>()?;
        Measure::new(model, parsed)
    }

    /// `μ(e) = laziness`, the rest uniform on the standard generators and inverses.
    pub fn lazy_simple(model: GroupModel, laziness: BigRational) -> Result<Self, MeasureError> {
        if laziness.is_negative() || laziness >= BigRational::one() {
            return Err(MeasureError::BadLaziness);
        }
        let gens = model.symmetric_generators();
        if gens.is_empty() {
            return Err(MeasureError::PresetMismatch("lazy-simple".into(), model.to_string()));
        }
        let each = (BigRational::one() - &laziness) / BigRational::from_integer(gens.len().into());
        let mut atoms: Vec<_> = gens.into_iter().map(|g| (g, each.clone())).collect();
        if !laziness.is_zero() {
            atoms.push((model.identity(), laziness));
        }
        Measure::new(model, atoms)
    }

    /// The uniform measure on the standard generators and their inverses.
    pub fn simple(model: GroupModel) -> Result<Self, MeasureError> {
        Measure::lazy_simple(model, BigRational::zero())
    }

    /// The measure on `F₂ × ℤ/2ℤ` with weight `α` at the identity and
    /// `(1−α)/6` on each of `(a^{±1},0)`, `(b^{±1},0)`, `(a^{±1},1)`.
    pub fn example_f2c2(alpha: BigRational) -> Result<Self, MeasureError> {
        if alpha.is_negative() || alpha >= BigRational::one() {
            return Err(MeasureError::BadLaziness);
        }
        let model = GroupModel::product(GroupModel::free(2)?, GroupModel::cyclic(2)?);
        let rest = (BigRational::one() - &alpha) * ratio(1, 6);
        let mut atoms = Vec::new();
        for text in ["(a,0)", "(A,0)", "(b,0)", "(B,0)", "(a,1)", "(A,1)"] {
            atoms.push((model.parse(text)?, rest.clone()));
        }
        if !alpha.is_zero() {
            atoms.push((model.identity(), alpha));
        }
        Measure::new(model, atoms)
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn atoms(&self) -> &[(GroupElement, BigRational)] {
        &self.atoms
    }

    pub fn weight(&self, g: &GroupElement) -> BigRational {
        self.atoms
            .iter()
            .find(|(h, _)| h == g)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// SHA-256 over the group descriptor and the sorted atoms.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.model.descriptor().as_bytes());
        for (g, w) in &self.atoms {
            let enc = g.encode();
            h.update((enc.len() as u32).to_le_bytes());
            h.update(&enc);
            let w = w.to_string();
            h.update((w.len() as u32).to_le_bytes());
            h.update(w.as_bytes());
        }
        h.finalize().into()
    }

    /// Flags, with admissibility certified on the symmetric generator ball of
    /// `radius`. Since the ball is generated by the symmetric generators, it
    /// suffices that each of those lies in the semigroup spanned by `supp(μ)`;
    /// the search for them is a BFS capped at `search_budget` elements.
    pub fn validate(&self, radius: u32) -> MeasureFlags {
        self.validate_with_budget(radius, 200_000)
    }

    pub fn validate_with_budget(&self, radius: u32, search_budget: usize) -> MeasureFlags {
        let targets: Vec<GroupElement> = if radius == 0 {
            Vec::new()
        } else {
            self.model.symmetric_generators()
        };
        let mut missing: HashSet<GroupElement> = targets.iter().cloned().collect();
        let e = self.model.identity();
        let mut seen = HashSet::from([e.clone()]);
        let mut queue = VecDeque::from([e]);
        while let Some(x) = queue.pop_front() {
            if missing.is_empty() || seen.len() >= search_budget {
                break;
            }
            for (s, _) in &self.atoms {
                let y = self.model.mul(&x, s).expect("atom belongs to model");
                missing.remove(&y);
                if seen.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
        let unreachable: Vec<GroupElement> =
            targets.into_iter().filter(|g| missing.contains(g)).collect();
        MeasureFlags {
            lazy: self.lazy,
            symmetric: self.symmetric,
            radius,
            admissible_within_radius: unreachable.is_empty(),
            unreachable,
        }
    }

    /// `μ̄ₓ`; requires `|x| + 1 ≤ table.radius()`.
    pub fn truncate_at(
        &self,
        x: &GroupElement,
        table: &WordNormTable,
    ) -> Result<TruncatedMeasure, GroupError> {
        let nx = table.norm(x).filter(|&n| n < table.radius()).ok_or_else(|| {
            GroupError::OutOfRadius {
                element: self.model.format(x),
                radius: table.radius(),
            }
        })?;
        let mut atoms = Vec::new();
        let mut mass = BigRational::zero();
        for (s, w) in &self.atoms {
            let y = self.model.mul(x, s)?;
            if table.norm(&y) == Some(nx + 1) {
                mass += w;
                atoms.push((y, w.clone()));
            }
        }
        Ok(TruncatedMeasure {
            base: x.clone(),
            atoms,
            deficit: BigRational::one() - mass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_lazy() -> Measure {
        Measure::lazy_simple(GroupModel::free_abelian(1).unwrap(), ratio(1, 2)).unwrap()
    }

    #[test]
    fn lazy_walk_on_z_flags() {
        let mu = z_lazy();
        let flags = mu.validate(3);
        assert!(flags.lazy && flags.symmetric && flags.admissible_within_radius);
        assert_eq!(mu.weight(&GroupElement::integer(1)), ratio(1, 4));
    }

    #[test]
    fn dirac_is_not_admissible() {
        let z = GroupModel::free_abelian(1).unwrap();
        let mu = Measure::from_text(z, &[("1", "1")]).unwrap();
        let flags = mu.validate_with_budget(1, 1000);
        assert!(!flags.admissible_within_radius);
        assert_eq!(flags.unreachable, vec![GroupElement::integer(-1)]);
        assert!(!flags.lazy && !flags.symmetric);
    }

    #[test]
    fn rejects_bad_weights() {
        let z = GroupModel::free_abelian(1).unwrap();
        assert!(matches!(
            Measure::from_text(z.clone(), &[("1", "1/2"), ("-1", "1/4")]),
            Err(MeasureError::NotProbability(_))
        ));
        assert!(matches!(
            Measure::from_text(z.clone(), &[("1", "3/2"), ("-1", "-1/2")]),
            Err(MeasureError::NonPositive { .. })
        ));
        assert!(matches!(
            Measure::from_text(z.clone(), &[("1", "1/2"), ("1", "1/2")]),
            Err(MeasureError::Duplicate(_))
        ));
        assert!(Measure::from_text(z, &[("1", "0.5"), ("-1", "1/2")]).is_err());
    }

    #[test]
    fn example_measure_flags() {
        let mu = Measure::example_f2c2(ratio(1, 2)).unwrap();
        let flags = mu.validate(4);
        assert!(flags.lazy && flags.symmetric && flags.admissible_within_radius);
        assert_eq!(mu.atoms().len(), 7);
        assert_eq!(mu.weight(&mu.model().parse("(A,1)").unwrap()), ratio(1, 12));
    }

    #[test]
    fn truncation_on_z() {
        let mu = z_lazy();
        let table = WordNormTable::new(&mu, 6);
        let t0 = mu.truncate_at(&GroupElement::integer(0), &table).unwrap();
        assert_eq!(t0.atoms.len(), 2);
        assert_eq!(t0.deficit, ratio(1, 2));
        let t1 = mu.truncate_at(&GroupElement::integer(1), &table).unwrap();
        assert_eq!(t1.atoms, vec![(GroupElement::integer(2), ratio(1, 4))]);
        assert_eq!(t1.deficit, ratio(3, 4));
        assert!(mu.truncate_at(&GroupElement::integer(6), &table).is_err());
    }

    #[test]
    fn truncation_on_example_group() {
        let mu = Measure::example_f2c2(ratio(1, 2)).unwrap();
        let table = WordNormTable::new(&mu, 4);
        let x = mu.model().parse("(a,0)").unwrap();
        let t = mu.truncate_at(&x, &table).unwrap();
        let mut got: Vec<String> = t.atoms.iter().map(|(y, _)| mu.model().format(y)).collect();
        got.sort();
        assert_eq!(got, ["(aB,0)", "(aa,0)", "(aa,1)", "(ab,0)", "(e,1)"]);
        assert!(t.atoms.iter().all(|(_, w)| *w == ratio(1, 12)));
        assert_eq!(t.deficit, ratio(7, 12));
    }
}
