mod common;

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use walkbound::convolution::{PowerCache, RadialFreeWalk, Transitions};
use walkbound::fock::{
    build_q, build_s, build_t, diagonal_identity_check, enumerate_basis, operator_norm, quotient_norm_upper_bound,
    FockError, FockSpace, BASIS_BUDGET, NORM_ITERATIONS,
};
use walkbound::group::GroupElement;

fn z(k: i64) -> GroupElement {
    GroupElement::integer(k)
}

fn z_space(w: &mut PowerCache<BigRational>, targets: &[i64], max_level: u64) -> FockSpace {
    FockSpace::new(
        targets
            .iter()
            .map(|&t| enumerate_basis(w, &z(t), max_level, BASIS_BUDGET).unwrap())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shift_operators_are_real_and_normalized(n in 0u64..4, x in -2i64..3, y in -2i64..3, t in -2i64..3) {
        let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ())?;
        let space = z_space(&mut w, &[t, t + 1], 5);
        let pn = w.p_n(&z(x), &z(y), n)?;
        if pn.is_zero() {
            let vanishes = matches!(build_s(&mut w, n, &z(x), &z(y), &space), Err(FockError::ZeroTransition { .. }));
            prop_assert!(vanishes);
            return Ok(());
        }
        let s = build_s(&mut w, n, &z(x), &z(y), &space)?;
        let op = build_t(&mut w, n, &z(x), &z(y), &space)?;
        prop_assert_eq!(s.adjoint().adjoint(), s.clone());
        // T = S/√Pⁿ(x,y), entry by entry on the squares.
        prop_assert_eq!(s.nnz(), op.nnz());
        for (r, c, e) in s.entries() {
            let sq_t = op.get(r, c).square().cloned().unwrap();
            prop_assert_eq!(e.square().cloned().unwrap(), sq_t * &pn);
        }
        // Blocks never mix.
        for (r, c, _) in s.entries() {
            prop_assert_eq!(space.vector(r).0, space.vector(c).0);
        }
    }

    #[test]
    fn return_operator_products_are_diagonal(n in 1u64..4, t in -3i64..4) {
        let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ())?;
        let space = z_space(&mut w, &[t], 6);
        let op = build_t(&mut w, n, &z(0), &z(0), &space)?;
        prop_assert!(op.matmul(&op.adjoint())?.is_diagonal());
        prop_assert!(op.adjoint().matmul(&op)?.is_diagonal());
    }

    #[test]
    fn projections(ell in 0u64..5, x in -2i64..3) {
        let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ())?;
        let space = z_space(&mut w, &[0, 1], 5);
        let q = build_q(ell, &z(x), &space);
        prop_assert_eq!(q.matmul(&q)?, q.clone());
        prop_assert_eq!(q.adjoint(), q.clone());
        prop_assert_eq!(q.matmul(&build_q(ell + 1, &z(x), &space))?.nnz(), 0);
    }

    #[test]
    fn diagonal_entries_are_space_time_kernels(n in 1u64..4) {
        let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ())?;
        let d = diagonal_identity_check(&mut w, n, 4, 6)?;
        prop_assert!(d.holds && d.diagonal, "{:?}", d);
        let mut f = RadialFreeWalk::<BigRational>::new(common::f2_lazy(), ())?;
        let d = diagonal_identity_check(&mut f, n, 3, 5)?;
        prop_assert!(d.holds && d.diagonal, "{:?}", d);
    }
}

#[test]
fn truncated_norm_of_the_return_operator_is_at_least_the_lower_bound() {
    let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ()).unwrap();
    let space = z_space(&mut w, &[0], 8);
    let op = build_t(&mut w, 1, &z(0), &z(0), &space).unwrap();
    let norm = operator_norm(&op, 1e-12, NORM_ITERATIONS).unwrap();
    // ‖T‖² ≥ ‖T e^{(0)}_{e,e}‖² = 1/P(e,e) = 2.
    assert!(norm * norm >= 2.0 - 1e-9, "{norm}");
}

#[test]
fn quotient_bound_on_z_matches_direct_enumeration() {
    let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ()).unwrap();
    let q = quotient_norm_upper_bound(&mut w, 2, 40, 40, 1.0).unwrap();
    let mut best = BigRational::zero();
    for m in 3..=40u64 {
        for k in -40i64..=40 {
            let den = w.prob(&z(k), m).unwrap();
            if den.is_zero() {
                continue;
            }
            let v = w.prob(&z(k), m - 2).unwrap() / den;
            if v > best {
                best = v;
            }
        }
    }
    assert_eq!(q.bound, best);
    assert!(q.bound < w.prob(&z(0), 2).unwrap().recip());
}

#[test]
fn coordinate_export_has_a_header() {
    let mut w = PowerCache::<BigRational>::new(common::z_lazy(), ()).unwrap();
    let space = z_space(&mut w, &[1], 3);
    let op = build_s(&mut w, 1, &z(0), &z(1), &space).unwrap();
    let text = op.to_coordinate_text(&[("n", "1".into()), ("x", "0".into()), ("y", "1".into())]);
    assert!(text.starts_with("# n=1\n# x=0\n# y=1\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), op.nnz() + 1);
}
