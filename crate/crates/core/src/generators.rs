//! Rule-set rewritings that move a set one step along the hierarchy, and a
//! seeded random rule-set generator.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphs::Grd;
use crate::logic::{Atom, Rule, RuleSet, Side, Term};

fn var(name: String) -> Term {
    Term::var(name)
}

fn build(rules: Vec<Rule>) -> RuleSet {
    RuleSet::new(rules).expect("rewriting keeps rule sets well formed")
}

/// Splits every rule through a fresh predicate holding all body variables,
/// then links every first half to every second half through fresh unary
/// predicates fed by fresh existentials.
pub fn rewrite_split(rules: &RuleSet) -> RuleSet {
    let n = rules.len();
    let mut out = Vec::with_capacity(2 * n);
    for (i, r) in rules.iter().enumerate() {
        let vars: Vec<Term> = crate::logic::vars_of(&r.body).into_iter().map(|v| var(v.to_string())).collect();
        let bridge = Atom::new(format!("__thm1_p_{i}"), vars);
        let mut body = r.body.clone();
        body.extend((0..n).map(|j| Atom::new(format!("__thm1_link_{j}_{i}"), vec![var(format!("X_link_{j}_{i}"))])));
        out.push(Rule {
            id: format!("{}_1", r.id),
            body,
            negative: r.negative.clone(),
            head: vec![bridge.clone()],
        });
        let mut head = r.head.clone();
        head.extend((0..n).map(|j| Atom::new(format!("__thm1_link_{i}_{j}"), vec![var(format!("Z_link_{i}_{j}"))])));
        out.push(Rule {
            id: format!("{}_2", r.id),
            body: vec![bridge],
            negative: Vec::new(),
            head,
        });
    }
    build(out)
}

/// Which rule pairs receive linking atoms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linking {
    /// Pairs joined by a dependency path.
    #[default]
    Path,
    /// Pairs joined by a direct dependency.
    Direct,
}

fn predicate_positions(atoms: &[Atom], v: &str) -> BTreeSet<(String, usize)> {
    atoms
        .iter()
        .flat_map(|a| {
            a.args
                .iter()
                .enumerate()
                .filter(move |(_, t)| t.as_var() == Some(v))
                .map(move |(k, _)| (a.predicate.clone(), k))
        })
        .collect()
}

/// For every linked pair `(Ri, Rj)`, every frontier variable `x` of `Rj` and
/// head variable `y` of `Ri` sharing a predicate position, adds a fresh atom
/// on `x` to the body of `Rj` and the same predicate on `y` to the head of `Ri`.
pub fn rewrite_propagate(rules: &RuleSet, grd: &Grd, linking: Linking) -> RuleSet {
    let mut out: Vec<Rule> = rules.rules().to_vec();
    for (i, ri) in rules.iter().enumerate() {
        for (j, rj) in rules.iter().enumerate() {
            let linked = match linking {
                Linking::Path => grd.reaches(i, j),
                Linking::Direct => grd.has_edge(i, j),
            };
            if !linked {
                continue;
            }
            for x in rj.frontier() {
                let xs = predicate_positions(&rj.body, &x);
                for y in ri.atoms(Side::Head).iter().flat_map(|a| a.vars()).collect::<BTreeSet<_>>() {
                    if xs.is_disjoint(&predicate_positions(&ri.head, y)) {
                        continue;
                    }
                    let p = format!("__thm2_p_{i}_{j}_{x}_{y}");
                    out[j].body.push(Atom::new(p.clone(), vec![var(x.clone())]));
                    out[i].head.push(Atom::new(p, vec![var(y.to_string())]));
                }
            }
        }
    }
    build(out)
}

/// Adds `p(x)` with a fresh variable `x` to both sides of every rule, making
/// every rule depend on every rule.
pub fn rewrite_complete(rules: &RuleSet) -> RuleSet {
    build(
        rules
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let x = var(format!("X_prop6_{}", r.id));
                r.body.push(Atom::new("__prop6_p", vec![x.clone()]));
                r.head.push(Atom::new("__prop6_p", vec![x]));
                r
            })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub rules: usize,
    pub predicates: usize,
    pub max_arity: usize,
    pub max_body: usize,
    pub max_head: usize,
    /// Chance that a head argument is a fresh existential variable.
    pub existential_probability: f64,
    pub constant_probability: f64,
    /// Chance that a rule receives a negative atom.
    pub negation_probability: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            seed: 0,
            rules: 4,
            predicates: 4,
            max_arity: 3,
            max_body: 2,
            max_head: 2,
            existential_probability: 0.3,
            constant_probability: 0.05,
            negation_probability: 0.0,
        }
    }
}

/// A reproducible random rule set: same spec, same set.
pub fn random_rule_set(spec: &GeneratorSpec) -> RuleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let arities: Vec<usize> = (0..spec.predicates.max(1))
        .map(|_| rng.gen_range(1..=spec.max_arity.max(1)))
        .collect();
    let constants = ["a", "b"];
    let random_atom = |rng: &mut ChaCha8Rng, pool: &[String], fresh: Option<&mut Vec<String>>| {
        let p = rng.gen_range(0..arities.len());
        let mut fresh = fresh;
        let args = (0..arities[p])
            .map(|_| {
                if rng.gen_bool(spec.constant_probability) {
                    return Term::constant(*constants.choose(rng).unwrap());
                }
                if let Some(f) = fresh.as_deref_mut() {
                    if rng.gen_bool(spec.existential_probability) || pool.is_empty() {
                        if f.is_empty() || rng.gen_bool(0.5) {
                            f.push(format!("Z{}", f.len()));
                        }
                        return var(f.choose(rng).unwrap().clone());
                    }
                }
                var(pool.choose(rng).unwrap().clone())
            })
            .collect();
        Atom::new(format!("p{p}"), args)
    };
    let rules = (0..spec.rules)
        .map(|k| {
            let pool: Vec<String> = (0..spec.max_arity.max(1) + 1).map(|v| format!("X{v}")).collect();
            let body: Vec<Atom> = (0..rng.gen_range(1..=spec.max_body.max(1)))
                .map(|_| random_atom(&mut rng, &pool, None))
                .collect();
            let body_vars: Vec<String> = crate::logic::vars_of(&body).into_iter().map(str::to_string).collect();
            let mut existentials = Vec::new();
            let head: Vec<Atom> = (0..rng.gen_range(1..=spec.max_head.max(1)))
                .map(|_| random_atom(&mut rng, &body_vars, Some(&mut existentials)))
                .collect();
            let negative = if !body_vars.is_empty() && rng.gen_bool(spec.negation_probability) {
                vec![random_atom(&mut rng, &body_vars, None)]
            } else {
                Vec::new()
            };
            Rule::new(format!("R{}", k + 1), body, negative, head).expect("generated rules are safe")
        })
        .collect();
    build(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;
    use crate::parser::parse_rules;
    use crate::unify::DEFAULT_UNIFIER_CAP;

    #[test]
    fn split_shape() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V). [R3] a(X) -> b(X).").unwrap();
        let out = rewrite_split(&rs);
        assert_eq!(out.len(), 6);
        for i in 0..3 {
            let (first, second) = (out.get(2 * i), out.get(2 * i + 1));
            assert_eq!(first.body.len(), rs.get(i).body.len() + 3);
            assert_eq!(second.head.len(), rs.get(i).head.len() + 3);
            assert_eq!(second.existentials().len(), rs.get(i).existentials().len() + 3);
        }
        assert!(rewrite_split(&RuleSet::empty()).is_empty());
    }

    #[test]
    fn propagate_links_shared_positions() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).").unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let out = rewrite_propagate(&rs, &grd, Linking::Path);
        let added: Vec<&Atom> = out.iter().flat_map(|r| r.body.iter().chain(&r.head)).filter(|a| a.predicate.starts_with("__thm2")).collect();
        assert_eq!(added.len(), 2);
        assert_eq!(added[0].predicate, added[1].predicate);
        let independent = parse_rules("[A] a(X) -> b(X). [B] c(X) -> d(X).").unwrap();
        let grd = Grd::build(&independent, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        assert_eq!(rewrite_propagate(&independent, &grd, Linking::Path), independent);
    }

    #[test]
    fn complete_rewriting_completes_dependencies() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V). [R3] a(X) -> b(X).").unwrap();
        let out = rewrite_complete(&rs);
        let grd = Grd::build(&out, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        for i in 0..3 {
            for j in 0..3 {
                assert!(grd.has_edge(i, j));
            }
        }
        assert!(rewrite_complete(&RuleSet::empty()).is_empty());
    }

    #[test]
    fn random_sets_are_reproducible() {
        let spec = GeneratorSpec {
            seed: 7,
            ..GeneratorSpec::default()
        };
        assert_eq!(random_rule_set(&spec), random_rule_set(&spec));
        assert!(!random_rule_set(&spec).has_negation());
        let other = GeneratorSpec { seed: 8, ..spec };
        assert_ne!(random_rule_set(&spec), random_rule_set(&other));
        let neg = GeneratorSpec {
            negation_probability: 1.0,
            ..spec
        };
        assert!(random_rule_set(&neg).has_negation());
    }
}
