mod common;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use walkbound::convolution::PowerCache;
use walkbound::example::{Limit, F2C2};
use walkbound::group::{GroupElement, GroupModel, WordNormTable};
use walkbound::harmonic::{
    check_infinity_harmonic, check_space_time_harmonic, check_t_harmonic, dominance_check, lift_lambda, lift_zero,
    minimality_recursion_check, witness_nonminimal, BallFunction, SpaceTimeDomain, SpaceTimeFunction,
};
use walkbound::measure::Measure;
use walkbound::scalar::ratio;

/// `x ↦ Π cᵢ^{xᵢ}` on `ℤ^d`.
fn character(c: &[BigRational], x: &GroupElement) -> BigRational {
    let GroupElement::Abelian(v) = x else { unreachable!() };
    v.iter().zip(c).fold(BigRational::one(), |acc, (&k, ci)| {
        let p = ci.pow(k.unsigned_abs() as i32);
        if k >= 0 { acc * p } else { acc / p }
    })
}

fn ratios() -> impl Strategy<Value = BigRational> {
    (1i64..6, 1i64..6).prop_map(|(p, q)| ratio(p, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn characters_are_t_harmonic(d in 1usize..3, c in proptest::collection::vec(ratios(), 2), raw in common::weights()) {
        let mu = common::lazy_measure(GroupModel::free_abelian(d)?, &raw, false);
        let table = WordNormTable::new(&mu, 5);
        let c = &c[..d];
        let h = BallFunction::from_fn(mu.model(), table.elements(), |x| character(c, x));
        let t: BigRational = mu.atoms().iter().map(|(g, w)| w * character(c, g)).sum();
        let r = check_t_harmonic(&h, &mu, &t, &())?;
        prop_assert!(r.exact && r.checked > 0);
        // A wrong eigenvalue leaves a residual.
        let r = check_t_harmonic(&h, &mu, &(t + ratio(1, 7)), &())?;
        prop_assert!(!r.exact);
        // Lifted with λ = 1/t, the character becomes space-time harmonic and
        // satisfies the product recursion.
        let domain = SpaceTimeDomain::new(&mu, 4, 6)?;
        let t: BigRational = mu.atoms().iter().map(|(g, w)| w * character(c, g)).sum();
        prop_assert!(t > BigRational::zero());
        let f = lift_lambda(&h, &t.recip(), &domain, &())?;
        prop_assert!(check_space_time_harmonic(&f, &mu, &())?.exact);
        prop_assert!(minimality_recursion_check(&f, &()).exact);
    }

    #[test]
    fn harmonic_functions_form_a_cone(a in ratios(), b in ratios(), c1 in ratios()) {
        // Two characters with the same eigenvalue on the ½-lazy walk on ℤ: c and 1/c.
        let mu = common::z_lazy();
        let table = WordNormTable::new(&mu, 6);
        let h1 = BallFunction::from_fn(mu.model(), table.elements(), |x| character(std::slice::from_ref(&c1), x));
        let h2 = BallFunction::from_fn(mu.model(), table.elements(), |x| character(&[c1.recip()], x));
        let t = ratio(1, 2) + (c1.clone() + c1.recip()) / BigInt::from(4);
        let sum = h1.combine(&a, &h2, &b);
        prop_assert!(check_t_harmonic(&sum, &mu, &t, &())?.exact);
    }

    #[test]
    fn csv_round_trip(c in ratios()) {
        let mu = common::z_lazy();
        let table = WordNormTable::new(&mu, 4);
        let h = BallFunction::from_fn(mu.model(), table.elements(), |x| character(std::slice::from_ref(&c), x));
        let back = BallFunction::<BigRational>::from_csv(mu.model(), &(), &h.to_csv())?;
        for x in table.elements() {
            prop_assert_eq!(back.get(x), h.get(x));
        }
        let domain = SpaceTimeDomain::new(&mu, 3, 4)?;
        let f = lift_lambda(&h, &ratio(1, 2), &domain, &())?;
        let back = SpaceTimeFunction::<BigRational>::from_csv(&domain, &(), &f.to_csv())?;
        for (x, m) in f.points() {
            prop_assert_eq!(back.get(x, *m), f.get(x, *m));
        }
    }

    #[test]
    fn dominance_for_lifted_characters(c in ratios()) {
        // f ≥ Pⁿ(e,e)·f(·, ·+n) holds for every nonnegative space-time harmonic f.
        let mu = common::z_lazy();
        let table = WordNormTable::new(&mu, 6);
        let h = BallFunction::from_fn(mu.model(), table.elements(), |x| character(std::slice::from_ref(&c), x));
        let t = ratio(1, 2) + (c.clone() + c.recip()) / BigInt::from(4);
        let domain = SpaceTimeDomain::new(&mu, 6, 6)?;
        let f = lift_lambda(&h, &t.recip(), &domain, &())?;
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        prop_assert!(dominance_check(&f, &mut w, 4)?.holds());
    }
}

#[test]
fn zero_level_lift_of_an_infinity_harmonic_function() {
    let ex = F2C2::new(ratio(1, 2), 6).unwrap();
    let h0 = ex.closed_form_function(Limit::H0, 5);
    assert!(check_infinity_harmonic(&h0, ex.measure(), ex.table(), &()).unwrap().exact);
    let domain = SpaceTimeDomain::new(ex.measure(), 3, 3).unwrap();
    let f = lift_zero(&h0, ex.table(), &domain, &()).unwrap();
    // Supported on the norm shell m = |x|.
    for (x, m) in f.points() {
        let v = f.get(x, *m).unwrap();
        if ex.table().norm(x) != Some(*m as u32) {
            assert!(v.is_zero());
        }
    }
}

#[test]
fn h2_is_a_nontrivial_convex_combination() {
    let ex = F2C2::new(ratio(1, 2), 6).unwrap();
    let [h0, h1, h2] = Limit::ALL.map(|l| ex.closed_form_function(l, 5));
    let w = witness_nonminimal(&h2, &h0, &h1, 0.0, &());
    assert!(w.holds && w.non_minimal && !w.degenerate, "{w:?}");
    // h0 alone is not a mixture of itself and h1 with both weights positive.
    let w = witness_nonminimal(&h0, &h0, &h1, 0.0, &());
    assert!(!w.non_minimal, "{w:?}");
}

#[test]
fn non_harmonic_input_is_reported() {
    let mu = Measure::lazy_simple(GroupModel::free(2).unwrap(), ratio(1, 2)).unwrap();
    let table = WordNormTable::new(&mu, 3);
    let h = BallFunction::from_fn(mu.model(), table.elements(), |x| ratio(table.norm(x).unwrap() as i64 + 1, 1));
    assert!(!check_t_harmonic(&h, &mu, &ratio(1, 1), &()).unwrap().exact);
}
