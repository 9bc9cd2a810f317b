mod common;

use common::{f2_lazy, lazy_measure, small_model_and_elements, weights, z_lazy};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use walkbound::convolution::{PowerCache, RadialFreeWalk, Transitions};
use walkbound::group::{GroupElement, WordNormTable};
use walkbound::kernel::{
    green, martin_kernel, martin_kernel_at_r, space_time_kernel, zero_martin_kernel, SeriesOptions, SpaceTimePoint,
};
use walkbound::scalar::{ratio, BigFloat, Precision, Scalar};

/// `Pⁿ(0,k)` for the ½-lazy walk on ℤ: two independent ±½ half-steps.
fn binomial(n: u64, k: i64) -> BigRational {
    let top = 2 * n as i64;
    let j = n as i64 + k;
    if j < 0 || j > top {
        return BigRational::zero();
    }
    let mut c = BigInt::one();
    for i in 0..j {
        c = c * BigInt::from(top - i) / BigInt::from(i + 1);
    }
    BigRational::new(c, BigInt::from(4).pow(n as u32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn z_powers_match_binomial_oracle(n in 0u64..60, k in -70i64..70) {
        let mut w = PowerCache::<BigRational>::new(z_lazy(), ())?;
        prop_assert_eq!(w.prob(&GroupElement::integer(k), n)?, binomial(n, k));
    }

    #[test]
    fn green_is_symmetric_for_symmetric_measures(
        (m, els) in small_model_and_elements(2, 3),
        raw in weights(),
        lam in 1i64..4,
    ) {
        let mu = lazy_measure(m, &raw, true);
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        let l = ratio(lam, 8);
        let o = SeriesOptions { eps: 1e-15, ..Default::default() };
        let a = green(&mut w, &els[0], &els[1], &l, &o)?;
        let b = green(&mut w, &els[1], &els[0], &l, &o)?;
        prop_assert!(a.converged && b.converged);
        prop_assert_eq!(a.value, b.value);
    }

    #[test]
    fn martin_kernel_is_one_at_the_base_point(
        (m, els) in small_model_and_elements(1, 3),
        raw in weights(),
    ) {
        let mu = lazy_measure(m.clone(), &raw, false);
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        let o = SeriesOptions { eps: 1e-12, ..Default::default() };
        let k = martin_kernel(&mut w, &m.identity(), &els[0], &ratio(1, 4), &o)?;
        prop_assert!(k.value.is_one());
    }

    #[test]
    fn zero_martin_on_free_prefixes(word in common::element_of(&walkbound::group::GroupModel::free(2).unwrap(), 6), cut in 0usize..7) {
        // Only the geodesic reaches y in |y| steps, so K₀(x,y) = 8^{|x|} for prefixes x.
        let mu = f2_lazy();
        let table = WordNormTable::new(&mu, 6);
        let mut w = RadialFreeWalk::<BigRational>::new(mu, ())?;
        let GroupElement::Word(letters) = &word else { unreachable!() };
        let k = cut.min(letters.len());
        let x = GroupElement::Word(letters[..k].into());
        let v: BigRational = zero_martin_kernel(&mut w, &x, &word, &table)?;
        prop_assert_eq!(v, BigRational::from_integer(BigInt::from(8).pow(k as u32)));
        if k < letters.len() {
            let off = GroupElement::Word(letters[k..].into());
            let aligned = table.is_aligned(&off, &word)?;
            let v: BigRational = zero_martin_kernel(&mut w, &off, &word, &table)?;
            prop_assert_eq!(v.is_zero(), !aligned);
        }
    }

    #[test]
    fn space_time_kernel_is_one_from_the_origin(y in -6i64..6, extra in 0u64..10) {
        let mut w = PowerCache::<BigRational>::new(z_lazy(), ())?;
        let n = y.unsigned_abs() + extra;
        let origin = SpaceTimePoint::new_unchecked(GroupElement::integer(0), 0);
        let target = SpaceTimePoint::new(&mut w, GroupElement::integer(y), n)?;
        let k: BigRational = space_time_kernel(&mut w, &origin, &target)?;
        prop_assert!(k.is_one());
        // Going backwards in time gives zero.
        let later = SpaceTimePoint::new_unchecked(GroupElement::integer(0), n + 1);
        let k: BigRational = space_time_kernel(&mut w, &later, &target)?;
        prop_assert!(k.is_zero());
    }
}

#[test]
fn martin_kernel_at_radius_on_z_in_float_mode() {
    // ℤ has R = 1 and K(x,y|λ) → 1 as λ → 1.
    let p = Precision::from_digits(20).unwrap();
    let mut w = PowerCache::<BigFloat>::new(z_lazy(), p).unwrap();
    let lambdas: Vec<BigFloat> = (2..=7)
        .map(|k| BigFloat::lift(&p, &(BigRational::one() - ratio(1, 1 << k))))
        .collect();
    let o = SeriesOptions {
        eps: 1e-10,
        k_max: 100_000,
        radius: None,
    };
    let (x, y) = (GroupElement::integer(2), GroupElement::integer(-1));
    let r = martin_kernel_at_r(&mut w, &x, &y, &lambdas, 1.0, 1e-2, &o).unwrap();
    assert!((r.value.as_f64() - 1.0).abs() < 2e-2, "{r:?}");
}
