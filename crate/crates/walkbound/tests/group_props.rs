mod common;

use common::{element_of, model, model_and_elements, weights};
use proptest::prelude::*;
use walkbound::group::{GroupElement, GroupModel, WordNormTable};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_axioms((m, els) in model_and_elements(3, 8)) {
        let (a, b, c) = (&els[0], &els[1], &els[2]);
        let e = m.identity();
        prop_assert_eq!(m.mul(&m.mul(a, b)?, c)?, m.mul(a, &m.mul(b, c)?)?);
        prop_assert_eq!(&m.mul(a, &e)?, a);
        prop_assert_eq!(&m.mul(&e, a)?, a);
        prop_assert_eq!(m.mul(a, &m.inv(a)?)?, e.clone());
        prop_assert_eq!(m.mul(a, &m.between(a, b)?)?, b.clone());
    }

    #[test]
    fn encoding_and_text_round_trip((m, els) in model_and_elements(1, 10)) {
        let a = &els[0];
        prop_assert_eq!(&GroupElement::decode(&a.encode())?, a);
        prop_assert_eq!(&m.parse(&m.format(a))?, a);
        prop_assert!(m.contains(a));
    }

    #[test]
    fn descriptor_round_trip(m in model()) {
        let text = m.descriptor();
        prop_assert!(!text.is_empty());
        prop_assert_eq!(m.identity(), m.identity());
    }

    #[test]
    fn word_norm_is_subadditive_and_symmetric(
        (m, els) in model_and_elements(2, 3),
        raw in weights(),
    ) {
        let mu = common::lazy_measure(m.clone(), &raw, true);
        let table = WordNormTable::new(&mu, 6);
        let (x, y) = (&els[0], &els[1]);
        let xy = m.mul(x, y)?;
        let (nx, ny) = (table.norm(x).unwrap(), table.norm(y).unwrap());
        prop_assert_eq!(table.norm(&m.inv(x)?), Some(nx));
        prop_assert!(table.norm(&xy).unwrap() <= nx + ny);
        prop_assert!(table.is_aligned(&m.identity(), y)?);
        prop_assert!(table.is_aligned(y, y)?);
        // Spheres partition the ball in BFS order.
        let total: usize = (0..=6).map(|r| table.sphere(r).len()).sum();
        prop_assert_eq!(total, table.elements().len());
    }

    #[test]
    fn free_prefixes_are_aligned(len in 1usize..8, seed in element_of(&GroupModel::free(2).unwrap(), 8)) {
        let m = GroupModel::free(2)?;
        let mu = common::f2_lazy();
        let table = WordNormTable::new(&mu, 8);
        let GroupElement::Word(w) = &seed else { unreachable!() };
        let k = len.min(w.len());
        let prefix = GroupElement::Word(w[..k].into());
        prop_assert!(table.is_aligned(&prefix, &seed)?);
        prop_assert_eq!(table.norm(&seed).unwrap() as usize, m.free_length(&seed).unwrap());
    }
}
