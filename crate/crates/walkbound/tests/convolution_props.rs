mod common;

use common::{lazy_measure, model, weights};
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use walkbound::convolution::{radial_oracle_free, PowerCache, RadialFreeWalk, Transitions};
use walkbound::group::{GroupModel, WordNormTable};
use walkbound::measure::Measure;
use walkbound::scalar::{ratio, BigFloat, Precision, Scalar};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_and_chapman_kolmogorov_are_exact(m in model(), raw in weights(), symmetric in any::<bool>()) {
        let mu = lazy_measure(m, &raw, symmetric);
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        for n in 0..=5 {
            prop_assert!(w.total_mass(n)?.is_one());
            for k in 0..=n {
                prop_assert!(w.chapman_kolmogorov_check(k, n - k)?.exact);
            }
        }
    }

    #[test]
    fn probe_agrees_with_power(m in model(), raw in weights()) {
        let mu = lazy_measure(m, &raw, false);
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        let d = w.power(4)?;
        for (g, v) in d.entries() {
            prop_assert_eq!(&w.prob(g, 4)?, v);
        }
        prop_assert_eq!(w.support(4)?.len(), d.len());
    }

    #[test]
    fn float_mode_tracks_rational_mode(m in model(), raw in weights()) {
        let mu = lazy_measure(m, &raw, true);
        let p = Precision::from_digits(30)?;
        let mut exact = PowerCache::<BigRational>::new(mu.clone(), ())?;
        let mut float = PowerCache::<BigFloat>::new(mu, p)?;
        let d = exact.power(6)?;
        for (g, v) in d.entries() {
            let f = float.prob(g, 6)?;
            let want = BigFloat::lift(&p, v);
            let scale = want.as_f64().abs().max(f64::MIN_POSITIVE);
            prop_assert!((f.minus(&want)).as_f64().abs() / scale < 1e-25);
        }
        prop_assert!((float.total_mass(6)?.as_f64() - 1.0).abs() < 1e-25);
    }

    #[test]
    fn sphere_first_passage(m in model(), raw in weights()) {
        let mu = lazy_measure(m, &raw, false);
        let table = WordNormTable::new(&mu, 4);
        let mut w = PowerCache::<BigRational>::new(mu, ())?;
        prop_assert!(w.sphere_decomposition_check(&table, 4)?.exact);
    }

    #[test]
    fn radial_walk_matches_convolution(d in 2usize..4, laziness in 0i64..4) {
        let mu = Measure::lazy_simple(GroupModel::free(d)?, ratio(laziness, 4))?;
        let mut cache = PowerCache::<BigRational>::new(mu.clone(), ())?;
        let mut radial = RadialFreeWalk::<BigRational>::new(mu, ())?;
        for n in 0..=6 {
            for (g, v) in cache.power(n)?.entries() {
                prop_assert_eq!(&radial.prob(g, n)?, v);
            }
        }
    }
}

#[test]
fn kesten_return_probabilities() {
    // P^{2n}(e,e) on F₂ for the simple walk, from the birth–death chain on |x|.
    let want = [ratio(1, 1), ratio(1, 4), ratio(7, 64), ratio(29, 512), ratio(523, 16384)];
    for (k, q) in want.iter().enumerate() {
        assert_eq!(&radial_oracle_free(2, 2 * k as u64).unwrap(), q, "n = {}", 2 * k);
    }
}

#[test]
fn persisted_cache_is_reused_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mu = common::f2_lazy();
    let mut first = PowerCache::<BigRational>::new(mu.clone(), ()).unwrap().with_persistence(dir.path());
    let a = first.power(6).unwrap();
    drop(first);
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_some());
    let mut second = PowerCache::<BigRational>::new(mu, ()).unwrap().with_persistence(dir.path());
    assert_eq!(second.power(6).unwrap(), a);
}
