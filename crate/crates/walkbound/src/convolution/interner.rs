use std::hash::BuildHasher;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;

use crate::group::GroupElement;

/// Maps group elements to dense `u32` ids, in first-seen order.
#[derive(Default)]
pub struct Interner {
    elements: Vec<GroupElement>,
    table: HashTable<u32>,
    hasher: FxBuildHasher,
}

impl std::fmt::Debug for Interner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Interner").field("len", &self.elements.len()).finish()
    }
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn lookup(&self, g: &GroupElement) -> Option<u32> {
        let hash = self.hasher.hash_one(g);
        self.table
            .find(hash, |&id| self.elements[id as usize] == *g)
            .copied()
    }

    pub fn intern(&mut self, g: GroupElement) -> u32 {
        let hash = self.hasher.hash_one(&g);
        let Interner {
            elements,
            table,
            hasher,
        } = self;
        if let Some(&id) = table.find(hash, |&id| elements[id as usize] == g) {
            return id;
        }
        let id = elements.len() as u32;
        table.insert_unique(hash, id, |&i| hasher.hash_one(&elements[i as usize]));
        elements.push(g);
        id
    }

    pub fn element(&self, id: u32) -> &GroupElement {
        &self.elements[id as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_stable() {
        let mut interner = Interner::new();
        let a = interner.intern(GroupElement::integer(3));
        let b = interner.intern(GroupElement::integer(-3));
        assert_eq!(interner.intern(GroupElement::integer(3)), a);
        assert_ne!(a, b);
        assert_eq!(interner.lookup(&GroupElement::integer(-3)), Some(b));
        assert_eq!(interner.lookup(&GroupElement::integer(0)), None);
        assert_eq!(interner.element(b), &GroupElement::integer(-3));
    }
}
