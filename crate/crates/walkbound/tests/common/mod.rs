#![allow(dead_code)]

use num_rational::BigRational;
use proptest::prelude::*;
use walkbound::group::{FiniteGroup, GroupElement, GroupModel};
use walkbound::measure::Measure;
use walkbound::scalar::ratio;

pub fn models() -> Vec<GroupModel> {
    vec![
        GroupModel::free_abelian(1).unwrap(),
        GroupModel::free_abelian(2).unwrap(),
        GroupModel::free(2).unwrap(),
        GroupModel::free(3).unwrap(),
        GroupModel::cyclic(5).unwrap(),
        GroupModel::finite(FiniteGroup::symmetric(3).unwrap()),
        GroupModel::product(GroupModel::free(2).unwrap(), GroupModel::cyclic(2).unwrap()),
        GroupModel::product(GroupModel::free_abelian(1).unwrap(), GroupModel::cyclic(3).unwrap()),
    ]
}

pub fn model() -> impl Strategy<Value = GroupModel> {
    proptest::sample::select(models())
}

/// A product of up to `len` symmetric generators.
pub fn element_of(model: &GroupModel, len: usize) -> impl Strategy<Value = GroupElement> {
    let gens = model.symmetric_generators();
    let model = model.clone();
    proptest::collection::vec(0..gens.len(), 0..=len).prop_map(move |idx| {
        idx.iter()
            .fold(model.identity(), |acc, &i| model.mul(&acc, &gens[i]).unwrap())
    })
}

/// Models of polynomial growth, where long series stay affordable.
pub fn small_model() -> impl Strategy<Value = GroupModel> {
    proptest::sample::select(
        models()
            .into_iter()
            .filter(|m| !m.descriptor().contains("free:"))
            .collect::<Vec<_>>(),
    )
}

pub fn model_and_elements(k: usize, len: usize) -> impl Strategy<Value = (GroupModel, Vec<GroupElement>)> {
    model().prop_flat_map(move |m| with_elements(m, k, len))
}

pub fn small_model_and_elements(k: usize, len: usize) -> impl Strategy<Value = (GroupModel, Vec<GroupElement>)> {
    small_model().prop_flat_map(move |m| with_elements(m, k, len))
}

fn with_elements(m: GroupModel, k: usize, len: usize) -> impl Strategy<Value = (GroupModel, Vec<GroupElement>)> {
    let els = proptest::collection::vec(element_of(&m, len), k);
    (Just(m), els)
}

/// A lazy measure with random positive integer weights on every symmetric
/// generator and the identity, optionally symmetrized.
pub fn lazy_measure(model: GroupModel, raw: &[u32], symmetric: bool) -> Measure {
    let gens = model.symmetric_generators();
    let mut atoms: Vec<(GroupElement, u64)> = vec![(model.identity(), u64::from(raw[0]) + 1)];
    for (i, g) in gens.iter().enumerate() {
        let w = u64::from(raw[(i + 1) % raw.len()]) + 1;
        if let Some(slot) = atoms.iter_mut().find(|(h, _)| h == g) {
            slot.1 += w;
        } else {
            atoms.push((g.clone(), w));
        }
    }
    if symmetric {
        let copy = atoms.clone();
        for (g, w) in atoms.iter_mut() {
            let inv = model.inv(g).unwrap();
            *w += copy.iter().find(|(h, _)| *h == inv).unwrap().1;
        }
    }
    let total: u64 = atoms.iter().map(|(_, w)| w).sum();
    let atoms = atoms
        .into_iter()
        .map(|(g, w)| (g, ratio(w as i64, total as i64)))
        .collect();
    Measure::new(model, atoms).unwrap()
}

pub fn weights() -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0u32..6, 7)
}

pub fn z_lazy() -> Measure {
    Measure::lazy_simple(GroupModel::free_abelian(1).unwrap(), ratio(1, 2)).unwrap()
}

pub fn f2_lazy() -> Measure {
    Measure::lazy_simple(GroupModel::free(2).unwrap(), ratio(1, 2)).unwrap()
}

pub fn half() -> BigRational {
    ratio(1, 2)
}
