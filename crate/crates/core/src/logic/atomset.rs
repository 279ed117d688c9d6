use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;

use super::{Atom, Term};

/// Insertion-ordered set of atoms with a per-predicate index.
///
/// Indices are stable: atoms are never removed in place, so an index handed
/// out once stays valid. Use [`AtomSet::retain`] to build a filtered copy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomSet {
    atoms: IndexSet<Atom>,
    by_pred: HashMap<String, Vec<usize>>,
}

impl AtomSet {
    pub fn new() -> Self {
        AtomSet::default()
    }

    /// Returns true if the atom was not present.
    pub fn insert(&mut self, atom: Atom) -> bool {
        let pred = atom.predicate.clone();
        let (idx, fresh) = self.atoms.insert_full(atom);
        if fresh {
            self.by_pred.entry(pred).or_default().push(idx);
        }
        fresh
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn index_of(&self, atom: &Atom) -> Option<usize> {
        self.atoms.get_index_of(atom)
    }

    pub fn get(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    /// Indices of atoms with the given predicate, ascending.
    pub fn with_predicate(&self, predicate: &str) -> &[usize] {
        self.by_pred.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All terms occurring at argument positions (not inside functional terms).
    pub fn terms(&self) -> BTreeSet<Term> {
        self.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn retain(&self, mut keep: impl FnMut(usize, &Atom) -> bool) -> AtomSet {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, a)| keep(*i, a))
            .map(|(_, a)| a.clone())
            .collect()
    }

    pub fn to_vec(&self) -> Vec<Atom> {
        self.atoms.iter().cloned().collect()
    }

    pub fn max_term_depth(&self) -> usize {
        self.atoms
            .iter()
            .flat_map(|a| a.args.iter().map(Term::depth))
            .max()
            .unwrap_or(0)
    }
}

impl FromIterator<Atom> for AtomSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut s = AtomSet::new();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl Extend<Atom> for AtomSet {
    fn extend<I: IntoIterator<Item = Atom>>(&mut self, iter: I) {
        for a in iter {
            self.insert(a);
        }
    }
}

impl fmt::Display for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::super::atom;
    use super::*;

    #[test]
    fn index_tracks_predicates() {
        let mut s = AtomSet::new();
        assert!(s.insert(atom("p", &["a", "b"])));
        assert!(s.insert(atom("q", &["a"])));
        assert!(!s.insert(atom("p", &["a", "b"])));
        assert!(s.insert(atom("p", &["b", "b"])));
        assert_eq!(s.with_predicate("p"), &[0, 2]);
        assert_eq!(s.with_predicate("r"), &[] as &[usize]);
        let only_p = s.retain(|_, a| a.predicate == "p");
        assert_eq!(only_p.len(), 2);
        assert_eq!(only_p.with_predicate("p"), &[0, 1]);
    }
}
