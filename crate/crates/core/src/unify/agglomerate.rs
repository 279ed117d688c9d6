use std::collections::BTreeSet;

use super::{compose, rename_apart, unifiers, BudgetExceeded, Composed, Mode};
use crate::graphs::Grd;
use crate::logic::{Atom, Rule, RuleSet, Term, FRONTIER_PREDICATE};

/// A rule `B ∪ {fr(t)} -> H`: the base rule with some head variables marked
/// as possibly propagated, which removes their existential status.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agglomerated {
    pub rule: Rule,
    pub marked: BTreeSet<String>,
}

fn with_marks(base: &Rule, marked: &BTreeSet<String>) -> Rule {
    let mut body = base.body.clone();
    body.extend(marked.iter().map(|v| Atom::new(FRONTIER_PREDICATE, vec![Term::var(v.clone())])));
    Rule {
        id: base.id.clone(),
        body,
        negative: base.negative.clone(),
        head: base.head.clone(),
    }
}

/// Agglomerated rule for the pair `(i, j)`.
///
/// Rather than folding unifiers along explicit paths, the marks are computed
/// as a fixpoint: every rule lying on some path from rule `i` to a direct
/// predecessor of rule `j` may mark the head variables of rule `i` it can be
/// piece-unified with, given the marks found so far. This covers every path
/// set at once and never marks less than any single path would.
pub fn agglomerated_rule(rules: &RuleSet, grd: &Grd, i: usize, j: usize, cap: usize) -> Result<Agglomerated, BudgetExceeded> {
    let base = rules.get(i);
    let preds = grd.predecessors(j);
    let on_paths: Vec<usize> = (0..rules.len())
        .filter(|&m| grd.reaches(i, m) && (preds.contains(&m) || preds.iter().any(|&p| grd.reaches(m, p))))
        .collect();
    let copies: Vec<Rule> = on_paths
        .iter()
        .map(|&m| rename_apart(rules.get(m), &base.vars()))
        .collect();
    let mut marked = BTreeSet::new();
    loop {
        let current = with_marks(base, &marked);
        let mut grew = false;
        for copy in &copies {
            for mu in unifiers(&current, copy, Mode::Piece, cap)? {
                for &h in &mu.head_part {
                    for v in base.head[h].vars() {
                        grew |= marked.insert(v.to_string());
                    }
                }
            }
        }
        if !grew {
            return Ok(Agglomerated { rule: current, marked });
        }
    }
}

/// Head/body atom pairs `(h, b)` that some non-self-blocking piece-unifier of
/// the body of `target` with the agglomerated head unifies together.
pub fn u_edge_pairs(agg: &Agglomerated, target: &Rule, cap: usize) -> Result<Vec<(usize, usize)>, BudgetExceeded> {
    let target = rename_apart(target, &agg.rule.vars());
    let negation = agg.rule.has_negation() || target.has_negation();
    let mut out = BTreeSet::new();
    for mu in unifiers(&agg.rule, &target, Mode::Piece, cap)? {
        if negation && compose(&Composed::base(0, &agg.rule), &mu, &target, 1).rule.is_self_blocking() {
            continue;
        }
        for &b in &mu.body_part {
            for &h in &mu.head_part {
                if mu.joins(&target, b, &agg.rule, h) {
                    out.insert((h, b));
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::super::DEFAULT_UNIFIER_CAP;
    use super::*;
    use crate::par::Exec;
    use crate::parser::parse_rules;

    fn agg(text: &str, i: usize, j: usize) -> (RuleSet, Agglomerated) {
        let rs = parse_rules(text).unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let a = agglomerated_rule(&rs, &grd, i, j, DEFAULT_UNIFIER_CAP).unwrap();
        (rs, a)
    }

    #[test]
    fn direct_edge_keeps_base_rule() {
        let (rs, a) = agg("[R1] t(X,Y) -> p(Z,Y), q(Y). [R2] p(U,V), q(U) -> t(V,W).", 0, 1);
        // R2 is not on a path to a predecessor of itself other than through R1 -> R2
        assert_eq!(a.rule.head, rs.get(0).head);
        assert!(!a.marked.contains("Z"));
        assert_eq!(u_edge_pairs(&a, rs.get(1), DEFAULT_UNIFIER_CAP).unwrap(), vec![(1, 1)]);
    }

    #[test]
    fn side_path_marks_existential() {
        let text = "[R1] p(X1,Y1) -> q(Y1,Z1). [R2] q(X2,Y2) -> r(X2,Y2). \
                    [R3] r(X3,Y3), s(X3,Y3) -> p(X3,Y3). [R4] q(X4,Y4) -> s(X4,Y4).";
        let (rs, a) = agg(text, 0, 2);
        assert!(a.marked.contains("Z1"));
        assert!(a.rule.existentials().is_empty());
        assert!(a.rule.body.contains(&Atom::new("fr", vec![Term::var("Z1")])));
        assert_eq!(a.rule.head, rs.get(0).head);
    }

    #[test]
    fn chain_through_unrelated_head_marks() {
        let text = "[R1] a(X) -> p(X,Z), r(Z). [R2] r(W) -> s2(W). [R3] s2(V) -> s(V). [R4] p(U,T), s(T) -> t(T).";
        let (rs, a) = agg(text, 0, 3);
        assert!(a.marked.contains("Z"));
        assert!(u_edge_pairs(&a, rs.get(3), DEFAULT_UNIFIER_CAP).unwrap().contains(&(0, 0)));
    }
}
