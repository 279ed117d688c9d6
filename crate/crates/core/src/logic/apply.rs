use std::collections::BTreeSet;

use thiserror::Error;

use super::{Atom, AtomSet, Rule, RuleSet, Substitution, Term};

/// Monotone source of fresh names owned by one derivation.
#[derive(Clone, Debug, Default)]
pub struct FreshNames {
    next: usize,
    taken: BTreeSet<String>,
}

impl FreshNames {
    pub fn new() -> Self {
        FreshNames::default()
    }

    /// Names in `taken` are never handed out.
    pub fn avoiding(taken: impl IntoIterator<Item = String>) -> Self {
        FreshNames {
            next: 0,
            taken: taken.into_iter().collect(),
        }
    }

    fn next_with(&mut self, prefix: &str) -> String {
        loop {
            let name = format!("{prefix}{}", self.next);
            self.next += 1;
            if !self.taken.contains(&name) {
                return name;
            }
        }
    }

    /// A fresh variable (labelled null) `z<k>`.
    pub fn null(&mut self) -> Term {
        Term::var(self.next_with("z"))
    }

    /// A fresh constant `c<k>`, used when freezing facts.
    pub fn constant(&mut self) -> Term {
        Term::constant(self.next_with("c"))
    }

    pub fn issued(&self) -> usize {
        self.next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("rule {rule} is not applicable: body does not map into the atomset")]
    BodyNotMapped { rule: String },
    #[error("rule {rule} is not applicable: negative atom {atom} is present")]
    NegationViolated { rule: String, atom: String },
}

/// `π(safe(H))`: the head instantiated by `π` with a fresh null for each
/// existential variable.
pub fn instantiate_head(rule: &Rule, pi: &Substitution, fresh: &mut FreshNames) -> Vec<Atom> {
    let mut sub = pi.clone();
    for z in rule.existentials() {
        sub.insert(z, fresh.null());
    }
    sub.apply_atoms(&rule.head)
}

/// `α(F, R, π) = F ∪ π(safe(H))`, after checking that `π` maps the positive
/// body into `F` and no negative atom into `F`.
pub fn apply_rule(
    facts: &AtomSet,
    rule: &Rule,
    pi: &Substitution,
    fresh: &mut FreshNames,
) -> Result<AtomSet, ApplyError> {
    if !super::is_homomorphism(&rule.body, facts, pi) {
        return Err(ApplyError::BodyNotMapped {
            rule: rule.id.clone(),
        });
    }
    if let Some(n) = rule
        .negative
        .iter()
        .map(|a| pi.apply_atom(a))
        .find(|a| facts.contains(a))
    {
        return Err(ApplyError::NegationViolated {
            rule: rule.id.clone(),
            atom: n.to_string(),
        });
    }
    let mut out = facts.clone();
    out.extend(instantiate_head(rule, pi, fresh));
    Ok(out)
}

pub fn skolem_symbol(rule_id: &str, var: &str) -> String {
    format!("f_{rule_id}_{var}")
}

/// Replaces each existential `y` of the rule by `f_<rule>_<y>(frontier)`.
pub fn skolemize_rule(rule: &Rule) -> Rule {
    let existentials = rule.existentials();
    if existentials.is_empty() {
        return rule.clone();
    }
    let frontier: Vec<Term> = rule.frontier().into_iter().map(Term::var).collect();
    let sub = Substitution::from_pairs(existentials.into_iter().map(|y| {
        let t = Term::func(skolem_symbol(&rule.id, &y), frontier.clone());
        (y, t)
    }));
    Rule {
        head: sub.apply_atoms(&rule.head),
        ..rule.clone()
    }
}

pub fn skolemize(rules: &RuleSet) -> RuleSet {
    RuleSet::new(rules.iter().map(skolemize_rule).collect())
        .expect("skolemization keeps a valid rule set valid")
}

#[cfg(test)]
mod tests {
    use super::super::atom;
    use super::*;

    fn ex1() -> Rule {
        Rule::positive("R", vec![atom("p", &["X", "Y"])], vec![atom("p", &["X", "Z"])])
    }

    #[test]
    fn apply_introduces_nulls() {
        let f: AtomSet = [atom("p", &["a", "b"])].into_iter().collect();
        let pi = Substitution::from_pairs([("X".into(), Term::constant("a")), ("Y".into(), Term::constant("b"))]);
        let mut fresh = FreshNames::new();
        let out = apply_rule(&f, &ex1(), &pi, &mut fresh).unwrap();
        assert_eq!(out.to_vec(), vec![atom("p", &["a", "b"]), Atom::new("p", vec![Term::constant("a"), Term::var("z0")])]);
    }

    #[test]
    fn apply_without_new_atoms() {
        let f: AtomSet = [atom("p", &["a", "b"])].into_iter().collect();
        let r = Rule::positive("R", vec![atom("p", &["X", "Y"])], vec![atom("p", &["X", "Y"])]);
        let pi = Substitution::from_pairs([("X".into(), Term::constant("a")), ("Y".into(), Term::constant("b"))]);
        assert_eq!(apply_rule(&f, &r, &pi, &mut FreshNames::new()).unwrap(), f);
    }

    #[test]
    fn negation_blocks_application() {
        let f: AtomSet = [atom("q", &["a"]), atom("p", &["a"])].into_iter().collect();
        let r = Rule::new("R", vec![atom("q", &["X"])], vec![atom("p", &["X"])], vec![atom("r", &["X", "Y"])]).unwrap();
        let pi = Substitution::from_pairs([("X".into(), Term::constant("a"))]);
        assert!(matches!(
            apply_rule(&f, &r, &pi, &mut FreshNames::new()),
            Err(ApplyError::NegationViolated { .. })
        ));
    }

    #[test]
    fn skolem_terms_share_one_symbol() {
        let r = Rule::positive("R", vec![atom("h", &["X"])], vec![atom("p", &["X", "Y"]), atom("q", &["Y"])]);
        let s = skolemize_rule(&r);
        let f = Term::func("f_R_Y", vec![Term::var("X")]);
        assert_eq!(s.head, vec![Atom::new("p", vec![Term::var("X"), f.clone()]), Atom::new("q", vec![f])]);
        assert!(s.existentials().is_empty());
        assert_eq!(skolemize_rule(&s), s);
        let rs = RuleSet::new(vec![ex1()]).unwrap();
        assert_eq!(skolemize(&skolemize(&rs)), skolemize(&rs));
        assert_eq!(skolemize(&rs).signature(), rs.signature());
    }

    #[test]
    fn fresh_names_skip_taken() {
        let mut f = FreshNames::avoiding(["z0".to_string(), "c1".to_string()]);
        assert_eq!(f.null(), Term::var("z1"));
        assert_eq!(f.constant(), Term::constant("c2"));
    }
}
