use std::collections::BTreeSet;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{compose, rename_apart, unifiers, BudgetExceeded, Composed, Mode, Unifier};
use crate::logic::{exists_homomorphism, instantiate_head, vars_of, Atom, AtomSet, FreshNames, Rule, Substitution, Term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Dependency {
    Yes { witness: Unifier },
    No,
}

impl Dependency {
    pub fn holds(&self) -> bool {
        matches!(self, Dependency::Yes { .. })
    }
}

/// Whether `second` depends on `first`: some piece-unifier of the body of
/// `second` with the head of `first` whose composition is not self-blocking.
pub fn depends_on(first: &Rule, second: &Rule, cap: usize) -> Result<Dependency, BudgetExceeded> {
    let second = rename_apart(second, &first.vars());
    let negation = first.has_negation() || second.has_negation();
    for mu in unifiers(first, &second, Mode::Piece, cap)? {
        if negation {
            let c = compose(&Composed::base(0, first), &mu, &second, 1);
            if c.rule.is_self_blocking() {
                continue;
            }
        }
        return Ok(Dependency::Yes { witness: mu });
    }
    Ok(Dependency::No)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    Yes,
    No,
    OutOfScope,
}

/// Largest rule (in variables) the oracle accepts.
const ORACLE_MAX_VARS: usize = 7;
/// Search nodes before the oracle gives up.
const ORACLE_MAX_STEPS: usize = 2_000_000;

fn rule_constants(rules: &[&Rule], out: &mut BTreeSet<Term>) {
    fn walk(t: &Term, out: &mut BTreeSet<Term>) {
        match t {
            Term::Const { .. } => {
                out.insert(t.clone());
            }
            Term::Var { .. } => {}
            Term::Func { args, .. } => args.iter().for_each(|a| walk(a, out)),
        }
    }
    for r in rules {
        for a in r.body.iter().chain(&r.negative).chain(&r.head) {
            a.args.iter().for_each(|t| walk(t, out));
        }
    }
}

struct Oracle<'a> {
    first: &'a Rule,
    second: Rule,
    constants: Vec<Term>,
    steps: usize,
}

fn fresh_const(k: usize) -> Term {
    Term::constant(format!("#c{k}"))
}

impl Oracle<'_> {
    fn tick(&mut self) -> ControlFlow<OracleVerdict> {
        self.steps += 1;
        if self.steps > ORACLE_MAX_STEPS {
            ControlFlow::Break(OracleVerdict::OutOfScope)
        } else {
            ControlFlow::Continue(())
        }
    }

    /// Assigns the body variables of the first rule, canonically up to renaming
    /// of fresh constants.
    fn assign_first(&mut self, vars: &[String], i: usize, used: usize, pi: &mut Substitution) -> ControlFlow<OracleVerdict> {
        self.tick()?;
        if i == vars.len() {
            return self.with_trigger(pi, used);
        }
        let choices: Vec<Term> = self
            .constants
            .iter()
            .cloned()
            .chain((0..=used).map(fresh_const))
            .collect();
        for t in choices {
            let grows = t == fresh_const(used);
            pi.insert(vars[i].clone(), t);
            self.assign_first(vars, i + 1, used + usize::from(grows), pi)?;
        }
        pi.remove(&vars[i]);
        ControlFlow::Continue(())
    }

    fn with_trigger(&mut self, pi: &Substitution, used: usize) -> ControlFlow<OracleVerdict> {
        let base: AtomSet = pi.apply_atoms(&self.first.body).into_iter().collect();
        let mut fresh = FreshNames::avoiding(std::iter::empty());
        let produced: Vec<Atom> = instantiate_head(self.first, pi, &mut fresh)
            .into_iter()
            .map(|a| {
                // nulls get a reserved prefix so they cannot meet rule variables
                let sub = Substitution::from_pairs(
                    a.vars().into_iter().map(|v| (v.to_string(), Term::var(format!("#{v}")))),
                );
                sub.apply_atom(&a)
            })
            .collect();
        let blocked: Vec<Atom> = pi.apply_atoms(&self.first.negative);
        let body = self.second.body.clone();
        let mut choice = vec![None; body.len()];
        self.map_second(&body, 0, &mut choice, &mut Substitution::new(), &base, &produced, &blocked, used)
    }

    /// Decides, atom by atom, whether each body atom of the second rule lands
    /// on a produced atom (`Some`) or on an atom of the initial fact set (`None`).
    #[allow(clippy::too_many_arguments)]
    fn map_second(
        &mut self,
        body: &[Atom],
        i: usize,
        choice: &mut Vec<Option<usize>>,
        sigma: &mut Substitution,
        base: &AtomSet,
        produced: &[Atom],
        blocked: &[Atom],
        used: usize,
    ) -> ControlFlow<OracleVerdict> {
        self.tick()?;
        if i == body.len() {
            if choice.iter().all(Option::is_none) {
                return ControlFlow::Continue(());
            }
            let free: Vec<String> = vars_of(body)
                .into_iter()
                .filter(|v| !sigma.contains(v))
                .map(str::to_string)
                .collect();
            return self.assign_free(&free, 0, used, sigma, choice, base, produced, blocked);
        }
        choice[i] = None;
        self.map_second(body, i + 1, choice, sigma, base, produced, blocked, used)?;
        for (k, target) in produced.iter().enumerate() {
            let saved = sigma.clone();
            let mut ok = body[i].predicate == target.predicate;
            if ok {
                for (p, t) in body[i].args.iter().zip(&target.args) {
                    let image = sigma.apply_term(p);
                    match p {
                        Term::Var { name } if !sigma.contains(name) => {
                            sigma.insert(name.clone(), t.clone());
                        }
                        _ if image == *t => {}
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if ok {
                choice[i] = Some(k);
                self.map_second(body, i + 1, choice, sigma, base, produced, blocked, used)?;
                choice[i] = None;
            }
            *sigma = saved;
        }
        ControlFlow::Continue(())
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_free(
        &mut self,
        free: &[String],
        i: usize,
        used: usize,
        sigma: &mut Substitution,
        choice: &[Option<usize>],
        base: &AtomSet,
        produced: &[Atom],
        blocked: &[Atom],
    ) -> ControlFlow<OracleVerdict> {
        self.tick()?;
        if i == free.len() {
            return if self.check(sigma, choice, base, produced, blocked) {
                ControlFlow::Break(OracleVerdict::Yes)
            } else {
                ControlFlow::Continue(())
            };
        }
        let mut pool: BTreeSet<Term> = base.terms();
        pool.extend(self.constants.iter().cloned());
        pool.extend((0..=used).map(fresh_const));
        for t in pool {
            let grows = t == fresh_const(used);
            sigma.insert(free[i].clone(), t);
            self.assign_free(free, i + 1, used + usize::from(grows), sigma, choice, base, produced, blocked)?;
        }
        sigma.remove(&free[i]);
        ControlFlow::Continue(())
    }

    fn check(&self, sigma: &Substitution, choice: &[Option<usize>], base: &AtomSet, produced: &[Atom], blocked: &[Atom]) -> bool {
        let mut facts = base.clone();
        for (b, c) in self.second.body.iter().zip(choice) {
            if c.is_none() {
                let image = sigma.apply_atom(b);
                if image.args.iter().any(|t| t.as_var().is_some_and(|v| v.starts_with('#'))) {
                    return false;
                }
                facts.insert(image);
            }
        }
        if blocked.iter().any(|a| facts.contains(a)) {
            return false;
        }
        let is_new = self.second.body.iter().any(|b| !facts.contains(&sigma.apply_atom(b)));
        if !is_new {
            return false;
        }
        let mut after = facts.clone();
        after.extend(produced.iter().cloned());
        if self.second.negative.iter().any(|a| after.contains(&sigma.apply_atom(a))) {
            return false;
        }
        !exists_homomorphism(&self.second.head, &after, sigma)
    }
}

/// Semantic dependency check by exhaustive search over small fact sets: is
/// there a fact set on which applying `first` enables a new, useful
/// application of `second`?
pub fn dependency_oracle(first: &Rule, second: &Rule) -> OracleVerdict {
    let second = rename_apart(second, &first.vars());
    let first_vars: Vec<String> = vars_of(&first.body).into_iter().map(str::to_string).collect();
    if first_vars.len() > ORACLE_MAX_VARS || vars_of(&second.body).len() > ORACLE_MAX_VARS {
        return OracleVerdict::OutOfScope;
    }
    let mut consts = BTreeSet::new();
    rule_constants(&[first, &second], &mut consts);
    let mut oracle = Oracle {
        first,
        second,
        constants: consts.into_iter().collect(),
        steps: 0,
    };
    match oracle.assign_first(&first_vars, 0, 0, &mut Substitution::new()) {
        ControlFlow::Break(v) => v,
        ControlFlow::Continue(()) => OracleVerdict::No,
    }
}

#[cfg(test)]
mod tests {
    use super::super::DEFAULT_UNIFIER_CAP;
    use super::*;
    use crate::logic::atom;

    fn pair() -> (Rule, Rule) {
        (
            Rule::positive("R1", vec![atom("h", &["X"])], vec![atom("p", &["X", "Y"])]),
            Rule::positive("R2", vec![atom("p", &["U", "V"]), atom("q", &["V"])], vec![atom("h", &["V"])]),
        )
    }

    #[test]
    fn dependency_direction() {
        let (r1, r2) = pair();
        assert!(!depends_on(&r1, &r2, DEFAULT_UNIFIER_CAP).unwrap().holds());
        assert!(depends_on(&r2, &r1, DEFAULT_UNIFIER_CAP).unwrap().holds());
        assert_eq!(dependency_oracle(&r1, &r2), OracleVerdict::No);
        assert_eq!(dependency_oracle(&r2, &r1), OracleVerdict::Yes);
    }

    #[test]
    fn swap_rule_depends_on_itself() {
        let r = Rule::positive("R", vec![atom("p", &["X", "Y"])], vec![atom("p", &["Y", "X"])]);
        assert!(depends_on(&r, &r, DEFAULT_UNIFIER_CAP).unwrap().holds());
        // the second application only re-derives the starting atom
        assert_eq!(dependency_oracle(&r, &r), OracleVerdict::No);
        let grow = Rule::positive("G", vec![atom("p", &["X", "Y"])], vec![atom("p", &["Y", "Z"])]);
        assert_eq!(dependency_oracle(&grow, &grow), OracleVerdict::Yes);
    }

    #[test]
    fn disjoint_predicates() {
        let a = Rule::positive("A", vec![atom("p", &["X"])], vec![atom("q", &["X"])]);
        let b = Rule::positive("B", vec![atom("r", &["X"])], vec![atom("s", &["X"])]);
        assert!(!depends_on(&a, &b, DEFAULT_UNIFIER_CAP).unwrap().holds());
        assert_eq!(dependency_oracle(&a, &b), OracleVerdict::No);
    }

    #[test]
    fn self_blocking_composition_removes_dependency() {
        let a = Rule::positive("A", vec![atom("p", &["X"])], vec![atom("q", &["X"])]);
        let b = Rule::new("B", vec![atom("q", &["Y"])], vec![atom("p", &["Y"])], vec![atom("r", &["Y"])]).unwrap();
        assert!(!depends_on(&a, &b, DEFAULT_UNIFIER_CAP).unwrap().holds());
        assert_eq!(dependency_oracle(&a, &b), OracleVerdict::No);
    }

    #[test]
    fn useless_self_application_is_refined_by_oracle() {
        let r = Rule::positive("R", vec![atom("p", &["X", "Y"])], vec![atom("p", &["X", "Z"])]);
        assert!(depends_on(&r, &r, DEFAULT_UNIFIER_CAP).unwrap().holds());
        assert_eq!(dependency_oracle(&r, &r), OracleVerdict::No);
    }
}
