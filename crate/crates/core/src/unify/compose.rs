use std::collections::BTreeSet;

use indexmap::IndexMap;

use super::Unifier;
use crate::logic::{Atom, Rule};

/// A rule obtained by folding unified rules, remembering which original head
/// atoms (rule index, atom index) each head atom comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Composed {
    pub rule: Rule,
    pub origins: Vec<BTreeSet<(usize, usize)>>,
    /// Indices of the folded rules, in order.
    pub chain: Vec<usize>,
}

impl Composed {
    pub fn base(index: usize, rule: &Rule) -> Self {
        Composed {
            rule: rule.clone(),
            origins: (0..rule.head.len()).map(|k| BTreeSet::from([(index, k)])).collect(),
            chain: vec![index],
        }
    }

    /// Positions (origin rule, origin atom, 1-based argument) where `var` occurs in the head.
    pub fn head_positions_of(&self, var: &str) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (a, atom) in self.rule.head.iter().enumerate() {
            for (i, t) in atom.args.iter().enumerate() {
                if t.as_var() == Some(var) {
                    for &(r, k) in &self.origins[a] {
                        out.push((r, k, i + 1));
                    }
                }
            }
        }
        out
    }
}

/// `R1 ⊙_μ R2`: head `μ(H1) ∪ μ(H2)`, body `μ(B1) ∪ (μ(B2) \ μ(H1))`,
/// negative body `μ(B1-) ∪ μ(B2-)`. `second` must be the body rule of `mu`.
pub fn compose(first: &Composed, mu: &Unifier, second: &Rule, second_index: usize) -> Composed {
    let s = &mu.subst;
    let mut head: IndexMap<Atom, BTreeSet<(usize, usize)>> = IndexMap::new();
    for (a, o) in first.rule.head.iter().zip(&first.origins) {
        head.entry(s.apply_atom(a)).or_default().extend(o.iter().copied());
    }
    let first_head: BTreeSet<Atom> = head.keys().cloned().collect();
    for (k, a) in second.head.iter().enumerate() {
        head.entry(s.apply_atom(a)).or_default().insert((second_index, k));
    }
    let mut body = s.apply_atoms(&first.rule.body);
    for a in s.apply_atoms(&second.body) {
        if !first_head.contains(&a) && !body.contains(&a) {
            body.push(a);
        }
    }
    let mut negative = s.apply_atoms(&first.rule.negative);
    for a in s.apply_atoms(&second.negative) {
        if !negative.contains(&a) {
            negative.push(a);
        }
    }
    let (head, origins): (Vec<_>, Vec<_>) = head.into_iter().unzip();
    let mut chain = first.chain.clone();
    chain.push(second_index);
    Composed {
        rule: Rule {
            id: format!("{}.{}", first.rule.id, second.id),
            body,
            negative,
            head,
        },
        origins,
        chain,
    }
}

/// Left fold of a sequence `R1 μ1 R2 ... μk Rk+1`.
pub fn fold_sequence(first: Composed, steps: &[(Unifier, Rule, usize)]) -> Composed {
    steps
        .iter()
        .fold(first, |acc, (mu, rule, idx)| compose(&acc, mu, rule, *idx))
}

#[cfg(test)]
mod tests {
    use super::super::{unifiers, Mode, DEFAULT_UNIFIER_CAP};
    use super::*;
    use crate::logic::atom;

    #[test]
    fn composes_two_rules() {
        let r1 = Rule::positive("R1", vec![atom("p", &["X1", "Y1"])], vec![atom("q", &["Y1", "Z1"])]);
        let r2 = Rule::positive("R2", vec![atom("q", &["X2", "Y2"])], vec![atom("r", &["X2", "Y2"])]);
        let mu = &unifiers(&r1, &r2, Mode::Piece, DEFAULT_UNIFIER_CAP).unwrap()[0];
        let c = compose(&Composed::base(0, &r1), mu, &r2, 1);
        assert_eq!(c.rule.body, vec![atom("p", &["X1", "Y1"])]);
        assert_eq!(c.rule.head, vec![atom("q", &["Y1", "Z1"]), atom("r", &["Y1", "Z1"])]);
        assert_eq!(c.rule.existentials(), vec!["Z1"]);
        assert_eq!(c.origins[1], BTreeSet::from([(1, 0)]));
        assert_eq!(c.head_positions_of("Z1"), vec![(0, 0, 2), (1, 0, 2)]);
    }

    #[test]
    fn fully_absorbed_body() {
        let r1 = Rule::positive("R1", vec![atom("a", &["X"])], vec![atom("b", &["X"])]);
        let r2 = Rule::positive("R2", vec![atom("b", &["Y"])], vec![atom("c", &["Y"])]);
        let mu = &unifiers(&r1, &r2, Mode::Piece, DEFAULT_UNIFIER_CAP).unwrap()[0];
        let c = compose(&Composed::base(0, &r1), mu, &r2, 1);
        assert_eq!(c.rule.body, r1.body);
    }
}
