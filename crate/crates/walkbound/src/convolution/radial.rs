use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::{ConvolutionError, SweepVisitor, Transitions};
use crate::group::{GroupElement, GroupModel, Word};
use crate::measure::Measure;
use crate::scalar::Scalar;

/// Transition probabilities of a radial measure on `F_d`: weight `p₀` at
/// `e` and a common weight on each of the `2d` letters.
///
/// The distance from the origin is then a birth–death chain (stay `p₀`,
/// down one letter, up `2d−1` letters, or `2d` from the origin), and
/// `μ*ⁿ(g) = P(|Xₙ| = |g|) / |S_{|g|}|` with `|S_r| = 2d(2d−1)^{r−1}`.
#[derive(Debug)]
pub struct RadialFreeWalk<S: Scalar> {
    measure: Measure,
    ctx: S::Context,
    rank: usize,
    /// stay, up from r ≥ 1, up from 0, down
    weights: [S::Weight; 4],
    unit_scale: S,
    rows: Vec<Vec<S::Mass>>,
    row_limit: usize,
    tail: Option<(u64, Vec<S::Mass>)>,
}

impl<S: Scalar> RadialFreeWalk<S> {
    /// Rows up to this `n` are memoized; later ones are recomputed on demand.
    pub const DEFAULT_ROW_LIMIT: usize = 256;

    pub fn new(measure: Measure, ctx: S::Context) -> Result<Self, ConvolutionError> {
        let GroupModel::Free { rank } = *measure.model() else {
            return Err(ConvolutionError::NotRadial("group is not free".into()));
        };
        let model = measure.model();
        let letters = model.symmetric_generators();
        let letter_weight = measure.weight(&letters[0]);
        let stay = measure.weight(&model.identity());
        if letters.iter().any(|l| measure.weight(l) != letter_weight)
            || measure.atoms().len() != letters.len() + usize::from(measure.is_lazy())
        {
            return Err(ConvolutionError::NotRadial(
                "weights are not uniform on the letters".into(),
            ));
        }
        let int = |k: usize| BigRational::from_integer(BigInt::from(k));
        let raw = [
            stay,
            &letter_weight * int(2 * rank - 1),
            &letter_weight * int(2 * rank),
            letter_weight,
        ];
        let (w, unit_scale) = S::step_weights(&ctx, &raw)?;
        let weights = [w[0].clone(), w[1].clone(), w[2].clone(), w[3].clone()];
        Ok(RadialFreeWalk {
            rows: vec![vec![S::mass_unit(&ctx)]],
            measure,
            ctx,
            rank,
            weights,
            unit_scale,
            row_limit: Self::DEFAULT_ROW_LIMIT,
            tail: None,
        })
    }

    pub fn with_row_limit(mut self, limit: usize) -> Self {
        self.row_limit = limit;
        self
    }

    fn next_row(&self, prev: &[S::Mass]) -> Vec<S::Mass> {
        let [stay, up, up0, down] = &self.weights;
        let mut next = vec![S::mass_zero(); prev.len() + 1];
        for (r, c) in prev.iter().enumerate() {
            if S::mass_is_zero(c) {
                continue;
            }
            S::accumulate(&mut next[r], c, stay);
            if r == 0 {
                S::accumulate(&mut next[1], c, up0);
            } else {
                S::accumulate(&mut next[r + 1], c, up);
                S::accumulate(&mut next[r - 1], c, down);
            }
        }
        next
    }

    /// Masses of the distance chain after `n` steps (scale `unit_scaleⁿ`).
    pub fn radial_masses(&mut self, n: u64) -> Vec<S::Mass> {
        let n_us = n as usize;
        if n_us < self.rows.len() {
            return self.rows[n_us].clone();
        }
        let (mut m, mut row) = match &self.tail {
            Some((m, row)) if *m <= n && *m as usize >= self.rows.len() => (*m, row.clone()),
            _ => ((self.rows.len() - 1) as u64, self.rows.last().unwrap().clone()),
        };
        while m < n {
            row = self.next_row(&row);
            m += 1;
            if m as usize == self.rows.len() && (m as usize) <= self.row_limit {
                self.rows.push(row.clone());
            }
        }
        self.tail = Some((n, row.clone()));
        row
    }

    fn sphere_size(&self, r: usize) -> S {
        let q = if r == 0 {
            <BigRational as One>::one()
        } else {
            let d = self.rank as u64;
            BigRational::from_integer(BigInt::from(2 * d) * BigInt::from(2 * d - 1).pow(r as u32 - 1))
        };
        S::lift(&self.ctx, &q)
    }

    fn length(&self, g: &GroupElement) -> Result<usize, ConvolutionError> {
        self.measure.model().free_length(g).ok_or_else(|| {
            ConvolutionError::Group(crate::group::GroupError::ModelMismatch {
                element: format!("{g:?}"),
                model: self.measure.model().to_string(),
            })
        })
    }

    fn value(&self, row: &[S::Mass], scale: &S, r: usize, sphere: &S) -> S {
        match row.get(r) {
            Some(c) if !S::mass_is_zero(c) => S::from_mass(c, scale)
                .divide(sphere)
                .expect("sphere sizes are positive"),
            _ => S::zero_with(&self.ctx),
        }
    }
}

impl<S: Scalar> Transitions<S> for RadialFreeWalk<S> {
    fn measure(&self) -> &Measure {
        &self.measure
    }

    fn context(&self) -> &S::Context {
        &self.ctx
    }

    fn prob(&mut self, g: &GroupElement, n: u64) -> Result<S, ConvolutionError> {
        let r = self.length(g)?;
        if r as u64 > n {
            return Ok(S::zero_with(&self.ctx));
        }
        let row = self.radial_masses(n);
        let scale = self.unit_scale.pow_with(&self.ctx, n);
        let sphere = self.sphere_size(r);
        Ok(self.value(&row, &scale, r, &sphere))
    }

    fn sweep(
        &mut self,
        targets: &[GroupElement],
        n_max: u64,
        visit: &mut SweepVisitor<'_, S>,
    ) -> Result<(), ConvolutionError> {
        let lengths = targets
            .iter()
            .map(|g| self.length(g))
            .collect::<Result<Vec<_>, _>>()?;
        let spheres: Vec<S> = lengths.iter().map(|&r| self.sphere_size(r)).collect();
        let mut row = self.rows[0].clone();
        let mut scale = S::one_with(&self.ctx);
        for n in 0..=n_max {
            if n > 0 {
                row = match self.rows.get(n as usize) {
                    Some(r) => r.clone(),
                    None => self.next_row(&row),
                };
                scale = scale.times(&self.unit_scale);
            }
            let this = &*self;
            let (row, scale) = (&row, &scale);
            if visit(n, &|i| this.value(row, scale, lengths[i], &spheres[i])).is_break() {
                break;
            }
        }
        Ok(())
    }

    fn support(&mut self, n: u64) -> Result<Vec<GroupElement>, ConvolutionError> {
        let row = self.radial_masses(n);
        let mut out = Vec::new();
        let mut shell: Vec<Word> = vec![Word::new()];
        let d = self.rank as i8;
        for mass in &row {
            if !S::mass_is_zero(mass) {
                out.extend(shell.iter().cloned().map(GroupElement::Word));
            }
            shell = shell
                .iter()
                .flat_map(|w| {
                    let last = w.last().copied();
                    (1..=d)
                        .flat_map(|l| [l, -l])
                        .filter(move |&l| last != Some(-l))
                        .map(move |l| {
                            let mut v = w.clone();
                            v.push(l);
                            v
                        })
                })
                .collect();
        }
        out.sort_by_cached_key(|g| g.encode());
        Ok(out)
    }

    fn scan_set(&mut self, radius: u32) -> Vec<GroupElement> {
        (0..=radius as usize)
            .map(|k| GroupElement::Word(std::iter::repeat(1i8).take(k).collect()))
            .collect()
    }

    fn orbit_key(&self, g: &GroupElement) -> GroupElement {
        let k = self.measure.model().free_length(g).unwrap_or(0);
        GroupElement::Word(std::iter::repeat(1i8).take(k).collect())
    }
}

/// Exact `Pⁿ(e,e)` for the simple random walk on `F_d`.
pub fn radial_oracle_free(d: usize, n: u64) -> Result<BigRational, ConvolutionError> {
    let mu = Measure::simple(GroupModel::free(d)?)?;
    let mut walk = RadialFreeWalk::<BigRational>::new(mu, ())?.with_row_limit(0);
    let e = walk.measure().model().identity();
    walk.prob(&e, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::PowerCache;
    use crate::scalar::ratio;

    #[test]
    fn hand_values() {
        assert_eq!(radial_oracle_free(2, 2).unwrap(), ratio(1, 4));
        assert_eq!(radial_oracle_free(2, 4).unwrap(), ratio(7, 64));
        assert_eq!(radial_oracle_free(2, 7).unwrap(), ratio(0, 1));
    }

    #[test]
    fn lazy_walk_matches_group_convolution() {
        let mu = Measure::lazy_simple(GroupModel::free(2).unwrap(), ratio(1, 2)).unwrap();
        let mut radial = RadialFreeWalk::<BigRational>::new(mu.clone(), ()).unwrap();
        let mut cache = PowerCache::<BigRational>::new(mu.clone(), ()).unwrap();
        let model = mu.model().clone();
        for text in ["e", "a", "aB", "BBa", "abab"] {
            let g = model.parse(text).unwrap();
            for n in 0..=6 {
                assert_eq!(radial.prob(&g, n).unwrap(), cache.prob(&g, n).unwrap(), "{text} {n}");
            }
        }
        assert_eq!(radial.support(3).unwrap(), cache.support(3).unwrap());
    }

    #[test]
    fn rejects_non_radial() {
        let model = GroupModel::free(2).unwrap();
        let mu = Measure::from_text(model, &[("a", "1/2"), ("A", "1/4"), ("b", "1/8"), ("B", "1/8")])
            .unwrap();
        assert!(RadialFreeWalk::<BigRational>::new(mu, ()).is_err());
    }

    #[test]
    fn tail_rows_agree_with_memoized_rows() {
        let mu = Measure::simple(GroupModel::free(2).unwrap()).unwrap();
        let mut short = RadialFreeWalk::<BigRational>::new(mu.clone(), ()).unwrap().with_row_limit(3);
        let mut long = RadialFreeWalk::<BigRational>::new(mu, ()).unwrap();
        let e = GroupModel::free(2).unwrap().identity();
        for n in [10, 4, 12, 12, 2] {
            assert_eq!(short.prob(&e, n).unwrap(), long.prob(&e, n).unwrap());
        }
    }
}
