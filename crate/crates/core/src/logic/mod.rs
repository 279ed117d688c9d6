//! Logical syntax: terms, atoms, rules and rule sets, plus substitutions.
//!
//! Everything here is immutable once built. A [`RuleSet`] always keeps its
//! rules standardized apart, so two distinct rules never share a variable.

mod apply;
mod atomset;
mod homomorphism;

pub use apply::{
    apply_rule, instantiate_head, skolem_symbol, skolemize, skolemize_rule, ApplyError, FreshNames,
};
pub use atomset::AtomSet;
pub use homomorphism::{
    exists_homomorphism, for_each_homomorphism, homomorphisms, is_homomorphism, AtomRange,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unary predicate reserved for agglomerated rules.
pub const FRONTIER_PREDICATE: &str = "fr";

/// A term: constant, variable, or functional term produced by skolemization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    Const { name: String },
    Var { name: String },
    Func { symbol: String, args: Vec<Term> },
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const { name: name.into() }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var { name: name.into() }
    }

    pub fn func(symbol: impl Into<String>, args: Vec<Term>) -> Self {
        Term::Func {
            symbol: symbol.into(),
            args,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var { name } => Some(name),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var { .. })
    }

    /// Variables in first-occurrence order (duplicates skipped).
    pub fn collect_vars<'a>(&'a self, out: &mut IndexSet<&'a str>) {
        match self {
            Term::Var { name } => {
                out.insert(name);
            }
            Term::Const { .. } => {}
            Term::Func { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn contains_var(&self, var: &str) -> bool {
        match self {
            Term::Var { name } => name == var,
            Term::Const { .. } => false,
            Term::Func { args, .. } => args.iter().any(|a| a.contains_var(var)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Func { args, .. } => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 0,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const { name } | Term::Var { name } => f.write_str(name),
            Term::Func { symbol, args } => {
                write!(f, "{symbol}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> IndexSet<&str> {
        let mut out = IndexSet::new();
        self.args.iter().for_each(|t| t.collect_vars(&mut out));
        out
    }

    pub fn contains_var(&self, var: &str) -> bool {
        self.args.iter().any(|t| t.contains_var(var))
    }

    pub fn is_ground(&self) -> bool {
        self.vars().is_empty()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Variables of an atom list in first-occurrence order.
pub fn vars_of(atoms: &[Atom]) -> IndexSet<&str> {
    let mut out = IndexSet::new();
    for a in atoms {
        a.args.iter().for_each(|t| t.collect_vars(&mut out));
    }
    out
}

/// Which side of a rule an atom lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Body,
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule {rule}: head is empty")]
    EmptyHead { rule: String },
    #[error("rule {rule}: variable {var} of the negative body does not occur in the positive body")]
    UnsafeNegation { rule: String, var: String },
    #[error("rule {rule}: predicate `{FRONTIER_PREDICATE}` is reserved")]
    ReservedPredicate { rule: String },
    #[error("predicate {predicate} used with arity {first} and {second}")]
    ArityConflict {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("duplicate rule identifier {0}")]
    DuplicateId(String),
}

/// An existential rule with an optional negative body.
///
/// Atom lists are duplicate-free and keep their source order; that order
/// fixes position naming (`R1.b0.2`) and the frontier order used by
/// skolemization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub body: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negative: Vec<Atom>,
    pub head: Vec<Atom>,
}

fn dedup(atoms: Vec<Atom>) -> Vec<Atom> {
    let set: IndexSet<Atom> = atoms.into_iter().collect();
    set.into_iter().collect()
}

impl Rule {
    pub fn new(
        id: impl Into<String>,
        body: Vec<Atom>,
        negative: Vec<Atom>,
        head: Vec<Atom>,
    ) -> Result<Self, RuleError> {
        let rule = Rule {
            id: id.into(),
            body: dedup(body),
            negative: dedup(negative),
            head: dedup(head),
        };
        if rule.head.is_empty() {
            return Err(RuleError::EmptyHead { rule: rule.id });
        }
        let positive = vars_of(&rule.body);
        if let Some(v) = vars_of(&rule.negative)
            .into_iter()
            .find(|v| !positive.contains(v))
        {
            return Err(RuleError::UnsafeNegation {
                rule: rule.id.clone(),
                var: v.to_string(),
            });
        }
        Ok(rule)
    }

    /// Positive rule shorthand used pervasively in tests.
    pub fn positive(id: impl Into<String>, body: Vec<Atom>, head: Vec<Atom>) -> Self {
        Rule::new(id, body, vec![], head).expect("well-formed rule")
    }

    pub fn has_negation(&self) -> bool {
        !self.negative.is_empty()
    }

    /// Frontier variables in order of first occurrence in the body.
    pub fn frontier(&self) -> Vec<String> {
        let head = vars_of(&self.head);
        vars_of(&self.body)
            .into_iter()
            .filter(|v| head.contains(v))
            .map(str::to_string)
            .collect()
    }

    /// Existential variables in order of first occurrence in the head.
    pub fn existentials(&self) -> Vec<String> {
        let body = vars_of(&self.body);
        vars_of(&self.head)
            .into_iter()
            .filter(|v| !body.contains(v))
            .map(str::to_string)
            .collect()
    }

    pub fn existential_set(&self) -> BTreeSet<String> {
        self.existentials().into_iter().collect()
    }

    pub fn is_existential(&self, var: &str) -> bool {
        self.head.iter().any(|a| a.contains_var(var)) && !self.body.iter().any(|a| a.contains_var(var))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        for a in self.body.iter().chain(&self.negative).chain(&self.head) {
            out.extend(a.vars().into_iter().map(str::to_string));
        }
        out
    }

    pub fn atoms(&self, side: Side) -> &[Atom] {
        match side {
            Side::Body => &self.body,
            Side::Head => &self.head,
        }
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> {
        self.body
            .iter()
            .chain(&self.negative)
            .chain(&self.head)
            .map(|a| (a.predicate.as_str(), a.arity()))
    }

    /// Renames every variable through `f`.
    pub fn rename_vars(&self, f: impl Fn(&str) -> String) -> Rule {
        let sub = Substitution::from_pairs(self.vars().into_iter().map(|v| {
            let n = f(&v);
            (v, Term::var(n))
        }));
        Rule {
            id: self.id.clone(),
            body: sub.apply_atoms(&self.body),
            negative: sub.apply_atoms(&self.negative),
            head: sub.apply_atoms(&self.head),
        }
    }

    /// `B- ∩ (B+ ∪ H) ≠ ∅`: the rule can never be applied.
    pub fn is_self_blocking(&self) -> bool {
        self.negative
            .iter()
            .any(|n| self.body.contains(n) || self.head.contains(n))
    }

    /// The rule without its negative body.
    pub fn positive_part(&self) -> Rule {
        Rule {
            negative: vec![],
            ..self.clone()
        }
    }
}

fn write_atoms(f: &mut fmt::Formatter<'_>, atoms: &[Atom], neg: bool) -> fmt::Result {
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        if neg {
            f.write_str("not ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.id)?;
        write_atoms(f, &self.body, false)?;
        if !self.negative.is_empty() {
            if !self.body.is_empty() {
                f.write_str(", ")?;
            }
            write_atoms(f, &self.negative, true)?;
        }
        if !self.body.is_empty() || !self.negative.is_empty() {
            f.write_str(" ")?;
        }
        f.write_str("-> ")?;
        write_atoms(f, &self.head, false)?;
        f.write_str(".")
    }
}

/// An ordered, standardized-apart set of rules.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rule>", into = "Vec<Rule>")]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl TryFrom<Vec<Rule>> for RuleSet {
    type Error = RuleError;
    fn try_from(rules: Vec<Rule>) -> Result<Self, RuleError> {
        RuleSet::new(rules)
    }
}

impl From<RuleSet> for Vec<Rule> {
    fn from(rs: RuleSet) -> Self {
        rs.rules
    }
}

impl RuleSet {
    /// Builds a rule set, renaming variables so that no two rules share one.
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut ids = BTreeSet::new();
        let mut arities: HashMap<String, usize> = HashMap::new();
        for r in &rules {
            if !ids.insert(r.id.clone()) {
                return Err(RuleError::DuplicateId(r.id.clone()));
            }
            for (p, n) in r.predicates() {
                if p == FRONTIER_PREDICATE {
                    return Err(RuleError::ReservedPredicate { rule: r.id.clone() });
                }
                match arities.get(p) {
                    Some(&m) if m != n => {
                        return Err(RuleError::ArityConflict {
                            predicate: p.to_string(),
                            first: m,
                            second: n,
                        })
                    }
                    Some(_) => {}
                    None => {
                        arities.insert(p.to_string(), n);
                    }
                }
            }
        }
        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut out = Vec::with_capacity(rules.len());
        for r in rules {
            let vars = r.vars();
            if vars.iter().any(|v| used.contains(v)) {
                let all_later: BTreeSet<String> = vars.clone();
                let mut map = BTreeMap::new();
                for v in &vars {
                    if !used.contains(v) {
                        map.insert(v.clone(), v.clone());
                        continue;
                    }
                    let mut candidate = format!("{v}_{}", r.id);
                    let mut k = 1;
                    while used.contains(&candidate)
                        || all_later.contains(&candidate)
                        || map.values().any(|x| x == &candidate)
                    {
                        candidate = format!("{v}_{}_{k}", r.id);
                        k += 1;
                    }
                    map.insert(v.clone(), candidate);
                }
                let renamed = r.rename_vars(|v| map[v].clone());
                used.extend(renamed.vars());
                out.push(renamed);
            } else {
                used.extend(vars);
                out.push(r);
            }
        }
        let set = RuleSet { rules: out };
        debug_assert!(set.is_standardized_apart());
        Ok(set)
    }

    pub fn empty() -> Self {
        RuleSet::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, i: usize) -> &Rule {
        &self.rules[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rule> {
        self.rules.iter()
    }

    pub fn has_negation(&self) -> bool {
        self.rules.iter().any(Rule::has_negation)
    }

    pub fn is_standardized_apart(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.rules
            .iter()
            .all(|r| r.vars().into_iter().all(|v| seen.insert(v)))
    }

    /// Predicate signature (name to arity), sorted by name.
    pub fn signature(&self) -> BTreeMap<String, usize> {
        self.rules
            .iter()
            .flat_map(|r| r.predicates())
            .map(|(p, n)| (p.to_string(), n))
            .collect()
    }

    /// The set with all negative bodies dropped.
    pub fn positive_part(&self) -> RuleSet {
        RuleSet {
            rules: self.rules.iter().map(Rule::positive_part).collect(),
        }
    }

    /// Sub-set of rules picked by index, in the original order.
    pub fn subset(&self, indices: &[usize]) -> RuleSet {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        RuleSet {
            rules: idx.into_iter().map(|i| self.rules[i].clone()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a RuleSet {
    type Item = &'a Rule;
    type IntoIter = std::slice::Iter<'a, Rule>;
    fn into_iter(self) -> Self::IntoIter {
        self.rules.iter()
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// A finite map from variables to terms. Application is a single pass:
/// no idempotence is assumed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Term)>) -> Self {
        Substitution(pairs.into_iter().collect())
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, term: Term) -> Option<Term> {
        self.0.insert(var.into(), term)
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.0.remove(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var { name } => self.0.get(name).cloned().unwrap_or_else(|| t.clone()),
            Term::Const { .. } => t.clone(),
            Term::Func { symbol, args } => Term::Func {
                symbol: symbol.clone(),
                args: args.iter().map(|a| self.apply_term(a)).collect(),
            },
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    /// Applies to each atom, dropping duplicates but keeping order.
    pub fn apply_atoms(&self, atoms: &[Atom]) -> Vec<Atom> {
        dedup(atoms.iter().map(|a| self.apply_atom(a)).collect())
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &Substitution) -> Substitution {
        let mut out: BTreeMap<String, Term> = inner
            .0
            .iter()
            .map(|(v, t)| (v.clone(), self.apply_term(t)))
            .collect();
        for (v, t) in &self.0 {
            out.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution(out)
    }

    /// Restricts the domain to `vars`.
    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a str>) -> Substitution {
        Substitution(
            vars.into_iter()
                .filter_map(|v| self.0.get(v).map(|t| (v.to_string(), t.clone())))
                .collect(),
        )
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}↦{t}")?;
        }
        f.write_str("}")
    }
}

/// Compact constructors for tests and generators: `atom("p", &["X", "a"])`.
/// Uppercase or `_`-prefixed names are variables, anything else constants.
pub fn atom(predicate: &str, args: &[&str]) -> Atom {
    Atom::new(predicate, args.iter().map(|s| term(s)).collect())
}

pub fn term(s: &str) -> Term {
    if s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
        Term::var(s)
    } else {
        Term::constant(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontier_and_existentials() {
        let r = Rule::positive("R1", vec![atom("h", &["X"])], vec![atom("p", &["X", "Y"])]);
        assert_eq!(r.frontier(), vec!["X"]);
        assert_eq!(r.existentials(), vec!["Y"]);

        let swap = Rule::positive("R", vec![atom("p", &["X", "Y"])], vec![atom("p", &["Y", "X"])]);
        assert_eq!(swap.frontier(), vec!["X", "Y"]);
        assert!(swap.existentials().is_empty());

        let fact = Rule::positive("F", vec![], vec![atom("p", &["a"])]);
        assert!(fact.frontier().is_empty());
        assert!(fact.existentials().is_empty());
    }

    #[test]
    fn unsafe_negation_rejected() {
        let err = Rule::new(
            "R",
            vec![atom("q", &["X"])],
            vec![atom("p", &["Y"])],
            vec![atom("r", &["X"])],
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::UnsafeNegation { .. }));
    }

    #[test]
    fn rule_sets_are_standardized_apart() {
        let rs = RuleSet::new(vec![
            Rule::positive("R1", vec![atom("h", &["X"])], vec![atom("p", &["X", "Y"])]),
            Rule::positive("R2", vec![atom("p", &["X", "Y"])], vec![atom("h", &["Y"])]),
        ])
        .unwrap();
        assert!(rs.is_standardized_apart());
        assert_eq!(rs.get(0).vars().len(), 2);
        assert_eq!(rs.get(1).body[0], atom("p", &["X_R2", "Y_R2"]));
    }

    #[test]
    fn reserved_and_arity_checks() {
        let fr = RuleSet::new(vec![Rule::positive("R", vec![atom("fr", &["X"])], vec![atom("p", &["X"])])]);
        assert!(matches!(fr, Err(RuleError::ReservedPredicate { .. })));
        let ar = RuleSet::new(vec![
            Rule::positive("A", vec![atom("p", &["X"])], vec![atom("q", &["X", "Y", "Z"])]),
            Rule::positive("B", vec![atom("p", &["U"])], vec![atom("q", &["U"])]),
        ]);
        assert!(matches!(ar, Err(RuleError::ArityConflict { .. })));
    }

    #[test]
    fn self_blocking() {
        let r = Rule::new("R", vec![atom("q", &["X"])], vec![atom("q", &["X"])], vec![atom("r", &["X"])]).unwrap();
        assert!(r.is_self_blocking());
        let ok = Rule::positive("R", vec![atom("q", &["X"])], vec![atom("r", &["X"])]);
        assert!(!ok.is_self_blocking());
    }

    #[test]
    fn compose_substitutions() {
        let inner = Substitution::from_pairs([("X".into(), Term::var("Y"))]);
        let outer = Substitution::from_pairs([("Y".into(), Term::constant("a"))]);
        let c = outer.compose(&inner);
        assert_eq!(c.apply_term(&Term::var("X")), Term::constant("a"));
        assert_eq!(c.apply_term(&Term::var("Y")), Term::constant("a"));
    }
}
