//! The lazy walk on `F₂ × ℤ/2ℤ` whose zero-level boundary contains a
//! non-minimal point.
//!
//! With step weight `q = (1−α)/6` the three sequences
//! `(abⁿ,0)`, `(abⁿ,1)`, `(abⁿa,1)` give the limits
//!
//! * `h₀ = q^{-|x|}` on the ray `{(e,0)} ∪ {(abᵏ,0)}`, zero elsewhere;
//! * `h₁ = q^{-|x|}` on `{(e,0)} ∪ {(abᵏ,1)}`, zero elsewhere;
//! * `h₂ = ½(h₀ + h₁)`.
//!
//! At `α = ½`, `q⁻¹ = 12`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::convolution::Transitions;
use crate::group::{GroupElement, GroupModel, WordNormTable};
use crate::harmonic::BallFunction;
use crate::kernel::{zero_martin_batch, KernelError};
use crate::measure::{Measure, MeasureError};

/// Which of the three boundary sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Limit {
    /// `(abⁿ, 0)`
    H0,
    /// `(abⁿ, 1)`
    H1,
    /// `(abⁿa, 1)`
    H2,
}

impl Limit {
    pub const ALL: [Limit; 3] = [Limit::H0, Limit::H1, Limit::H2];

    pub fn name(self) -> &'static str {
        match self {
            Limit::H0 => "h0",
            Limit::H1 => "h1",
            Limit::H2 => "h2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct F2C2 {
    alpha: BigRational,
    measure: Measure,
    table: WordNormTable,
}

impl F2C2 {
    /// `radius` bounds the word-norm table used for kernels and checks.
    pub fn new(alpha: BigRational, radius: u32) -> Result<Self, MeasureError> {
        let measure = Measure::example_f2c2(alpha.clone())?;
        let table = WordNormTable::new(&measure, radius);
        Ok(F2C2 { alpha, measure, table })
    }

    pub fn alpha(&self) -> &BigRational {
        &self.alpha
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn model(&self) -> &GroupModel {
        self.measure.model()
    }

    pub fn table(&self) -> &WordNormTable {
        &self.table
    }

    /// `q = (1−α)/6`.
    pub fn step_weight(&self) -> BigRational {
        (BigRational::one() - &self.alpha) / BigInt::from(6)
    }

    fn word(&self, text: &str) -> GroupElement {
        GroupModel::free(2).expect("rank 2").parse(text).expect("valid word")
    }

    fn sheet(&self, s: u32) -> GroupElement {
        GroupElement::Finite(s)
    }

    /// `(abᵏ, sheet)`, of norm `k + 1`.
    pub fn ray_point(&self, sheet: u32, k: usize) -> GroupElement {
        GroupElement::pair(self.word(&format!("a{}", "b".repeat(k))), self.sheet(sheet))
    }

    /// The `n`-th point of the sequence converging to `limit`.
    pub fn sequence(&self, limit: Limit, n: usize) -> GroupElement {
        match limit {
            Limit::H0 => self.ray_point(0, n),
            Limit::H1 => self.ray_point(1, n),
            Limit::H2 => GroupElement::pair(self.word(&format!("a{}a", "b".repeat(n))), self.sheet(1)),
        }
    }

    /// Membership in `{(e,0)} ∪ {(abᵏ, sheet)}`, with the norm when inside.
    pub fn ray_norm(&self, x: &GroupElement, sheet: u32) -> Option<usize> {
        if *x == self.model().identity() {
            return Some(0);
        }
        let GroupElement::Pair(p) = x else { return None };
        let len = GroupModel::free(2).ok()?.free_length(&p.0)?;
        (len > 0 && *x == self.ray_point(sheet, len - 1)).then_some(len)
    }

    /// Closed form of the limit at `x`.
    pub fn closed_form(&self, limit: Limit, x: &GroupElement) -> BigRational {
        let growth = self.step_weight().recip();
        let on = |sheet| {
            self.ray_norm(x, sheet)
                .map_or_else(BigRational::zero, |k| pow(&growth, k))
        };
        match limit {
            Limit::H0 => on(0),
            Limit::H1 => on(1),
            Limit::H2 => {
                if *x == self.model().identity() {
                    BigRational::one()
                } else {
                    (on(0) + on(1)) / BigInt::from(2)
                }
            }
        }
    }

    /// The closed form on the ball of the given radius.
    pub fn closed_form_function(&self, limit: Limit, radius: u32) -> BallFunction<BigRational> {
        BallFunction::from_fn(self.model(), self.table.ball(radius), |x| self.closed_form(limit, x))
    }

    /// `K₀(·, yₙ)` on the ball of the given radius.
    pub fn kernel_function<T>(
        &self,
        walk: &mut T,
        limit: Limit,
        n: usize,
        radius: u32,
    ) -> Result<BallFunction<BigRational>, KernelError>
    where
        T: Transitions<BigRational> + ?Sized,
    {
        let y = self.sequence(limit, n);
        let xs = self.table.ball(radius);
        let pairs: Vec<_> = xs.iter().map(|x| (x.clone(), y.clone())).collect();
        let values = zero_martin_batch(walk, &pairs, &self.table)?;
        Ok(BallFunction::from_fn(self.model(), xs, {
            let map: std::collections::HashMap<_, _> = xs.iter().cloned().zip(values).collect();
            move |x| map[x].clone()
        }))
    }
}

/// One named check of [`F2C2::verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl F2C2 {
    /// `K₀(x, yₙ)` predicted by the closed forms: the limit itself below
    /// `|yₙ|`, `1/P^{|yₙ|}(e,yₙ)` at `yₙ`, zero elsewhere.
    pub fn finite_kernel(&self, limit: Limit, n: usize, x: &GroupElement) -> BigRational {
        let y = self.sequence(limit, n);
        let ny = match limit {
            Limit::H2 => n + 2,
            _ => n + 1,
        };
        let nx = self.table.norm(x).map_or(usize::MAX, |v| v as usize);
        if *x == y {
            self.endpoint_probability(limit, n).recip()
        } else if nx < ny {
            self.closed_form(limit, x)
        } else {
            BigRational::zero()
        }
    }

    /// `P^{|yₙ|}(e, yₙ)`: `q^{n+1}` on the rays, `2q^{n+2}` for `(abⁿa,1)`.
    pub fn endpoint_probability(&self, limit: Limit, n: usize) -> BigRational {
        let q = self.step_weight();
        match limit {
            Limit::H2 => pow(&q, n + 2) * BigInt::from(2),
            _ => pow(&q, n + 1),
        }
    }

    /// Exact checks of the example on the ball of radius `radius` for all
    /// sequence indices up to `n`. Needs a table radius of at least
    /// `max(radius + 1, n + 2)`.
    pub fn verify<T>(&self, walk: &mut T, n: usize, radius: u32) -> Result<Vec<ExampleCheck>, KernelError>
    where
        T: Transitions<BigRational> + ?Sized,
    {
        use crate::harmonic::{check_infinity_harmonic, witness_nonminimal};
        let need = (radius + 1).max(n as u32 + 2);
        if self.table.radius() < need {
            return Err(KernelError::Input(format!(
                "table radius {} is below the required {need}",
                self.table.radius()
            )));
        }
        let mut checks = Vec::new();
        let mut push = |name: String, passed: bool, detail: String| {
            checks.push(ExampleCheck { name, passed, detail })
        };
        let h: Vec<_> = Limit::ALL.iter().map(|&l| self.closed_form_function(l, radius)).collect();
        for (l, f) in Limit::ALL.iter().zip(&h) {
            let r = check_infinity_harmonic(f, &self.measure, &self.table, &())
                .map_err(|e| KernelError::Input(e.to_string()))?;
            push(
                format!("{}_infinity_harmonic", l.name()),
                r.exact,
                format!("{} interior points, max residual {}", r.checked, r.max_residual),
            );
        }
        let w = witness_nonminimal(&h[2], &h[0], &h[1], 0.0, &());
        push(
            "h2_is_half_h0_plus_h1".into(),
            w.holds,
            format!("{} points{}", w.checked, w.mismatch.map_or(String::new(), |m| format!(", fails at {m}"))),
        );
        push(
            "h0_h1_not_proportional".into(),
            !w.degenerate,
            "h0 and h1 have disjoint supports off the identity".into(),
        );
        let e = self.model().identity();
        for l in Limit::ALL {
            let mut mismatch = None;
            let mut endpoint_ok = true;
            for k in 0..=n {
                let got = self.kernel_function(walk, l, k, radius)?;
                if let Some(x) = got
                    .domain()
                    .iter()
                    .find(|x| got.get(x) != Some(&self.finite_kernel(l, k, x)))
                {
                    mismatch.get_or_insert_with(|| format!("n={k} x={}", self.model().format(x)));
                }
                let y = self.sequence(l, k);
                let steps = self.table.norm(&y).map_or(0, u64::from);
                endpoint_ok &= walk.p_n(&e, &y, steps)? == self.endpoint_probability(l, k);
            }
            push(
                format!("{}_finite_kernels", l.name()),
                mismatch.is_none(),
                mismatch.unwrap_or_else(|| format!("K0(., y_k) matches for k <= {n}")),
            );
            push(
                format!("{}_endpoint_probability", l.name()),
                endpoint_ok,
                format!("P^|y_k|(e, y_k) for k <= {n}"),
            );
        }
        Ok(checks)
    }
}

fn pow(base: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::PowerCache;
    use crate::harmonic::{check_infinity_harmonic, witness_nonminimal};
    use crate::scalar::ratio;

    #[test]
    fn closed_forms_at_one_half() {
        let ex = F2C2::new(ratio(1, 2), 6).unwrap();
        assert_eq!(ex.step_weight(), ratio(1, 12));
        let p = ex.ray_point(1, 2);
        assert_eq!(ex.model().format(&p), "(abb,1)");
        assert_eq!(ex.closed_form(Limit::H1, &p), ratio(1728, 1));
        assert_eq!(ex.closed_form(Limit::H0, &p), ratio(0, 1));
        assert_eq!(ex.closed_form(Limit::H2, &p), ratio(864, 1));
        let e = ex.model().identity();
        for l in Limit::ALL {
            assert_eq!(ex.closed_form(l, &e), ratio(1, 1));
        }
        assert_eq!(ex.table().norm(&ex.sequence(Limit::H2, 3)), Some(5));
    }

    #[test]
    fn limits_are_infinity_harmonic_and_h2_splits() {
        let ex = F2C2::new(ratio(1, 2), 5).unwrap();
        let h: Vec<_> = Limit::ALL.iter().map(|&l| ex.closed_form_function(l, 5)).collect();
        for f in &h {
            let r = check_infinity_harmonic(f, ex.measure(), ex.table(), &()).unwrap();
            assert!(r.exact, "{:?}", r.argmax);
        }
        let w = witness_nonminimal(&h[2], &h[0], &h[1], 0.0, &());
        assert!(w.non_minimal);
    }

    #[test]
    fn verify_small() {
        let ex = F2C2::new(ratio(1, 2), 5).unwrap();
        let mut walk = PowerCache::<BigRational>::new(ex.measure().clone(), ()).unwrap();
        let checks = ex.verify(&mut walk, 3, 3).unwrap();
        assert_eq!(checks.len(), 11);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        assert!(ex.verify(&mut walk, 4, 3).is_err());
    }

    #[test]
    fn finite_kernels_match_closed_forms_inside_the_ball() {
        let ex = F2C2::new(ratio(1, 2), 7).unwrap();
        let mut walk = PowerCache::<BigRational>::new(ex.measure().clone(), ()).unwrap();
        for l in Limit::ALL {
            let k = ex.kernel_function(&mut walk, l, 4, 3).unwrap();
            assert_eq!(k, ex.closed_form_function(l, 3), "{}", l.name());
        }
    }
}
