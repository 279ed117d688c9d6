//! Unifiers of a rule body with a rule head, rule composition, dependency,
//! agglomerated rules and compatibility.

mod agglomerate;
mod compat;
mod compose;
mod depend;

pub use agglomerate::{agglomerated_rule, u_edge_pairs, Agglomerated};
pub use compat::{is_compatible, is_compatible_sequence};
pub use compose::{compose, fold_sequence, Composed};
pub use depend::{dependency_oracle, depends_on, Dependency, OracleVerdict};

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::logic::{vars_of, Atom, Rule, Substitution, Term};

/// Default cap on candidate (body subset, head subset) pairs per rule pair.
pub const DEFAULT_UNIFIER_CAP: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("unifier enumeration needs {needed} candidates, cap is {cap}")]
pub struct BudgetExceeded {
    pub needed: usize,
    pub cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// An existential may only meet body variables.
    Plain,
    /// Additionally, those body variables must not be separating.
    Piece,
}

/// A most general unifier of a body subset with a head subset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Unifier {
    pub head_rule: String,
    pub body_rule: String,
    /// (body atom, head atom) index pairs that were unified.
    pub pairs: Vec<(usize, usize)>,
    pub body_part: Vec<usize>,
    pub head_part: Vec<usize>,
    pub subst: Substitution,
}

impl Unifier {
    /// Whether the body atom and the head atom have the same image.
    pub fn joins(&self, body: &Rule, b: usize, head: &Rule, h: usize) -> bool {
        self.body_part.contains(&b)
            && self.head_part.contains(&h)
            && self.subst.apply_atom(&body.body[b]) == self.subst.apply_atom(&head.head[h])
    }
}

/// Renames the variables of `rule` that clash with `taken`.
pub fn rename_apart(rule: &Rule, taken: &BTreeSet<String>) -> Rule {
    let own = rule.vars();
    if own.iter().all(|v| !taken.contains(v)) {
        return rule.clone();
    }
    let mut used: BTreeSet<String> = taken.union(&own).cloned().collect();
    let mut map = HashMap::new();
    for v in &own {
        if taken.contains(v) {
            let mut k = 1;
            let fresh = loop {
                let c = format!("{v}_{k}");
                if !used.contains(&c) {
                    break c;
                }
                k += 1;
            };
            used.insert(fresh.clone());
            map.insert(v.clone(), fresh);
        }
    }
    rule.rename_vars(|v| map.get(v).cloned().unwrap_or_else(|| v.to_string()))
}

/// Union-find over variables, each class optionally bound to a non-variable term.
#[derive(Clone, Default)]
struct Classes {
    idx: HashMap<String, usize>,
    names: Vec<String>,
    parent: Vec<usize>,
    bound: Vec<Option<Term>>,
}

impl Classes {
    fn id(&mut self, v: &str) -> usize {
        if let Some(&i) = self.idx.get(v) {
            return i;
        }
        let i = self.names.len();
        self.idx.insert(v.to_string(), i);
        self.names.push(v.to_string());
        self.parent.push(i);
        self.bound.push(None);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Var { name: x }, Term::Var { name: y }) => {
                let (ix, iy) = (self.id(x), self.id(y));
                let (rx, ry) = (self.find(ix), self.find(iy));
                if rx == ry {
                    return true;
                }
                self.parent[ry] = rx;
                match (self.bound[rx].take(), self.bound[ry].take()) {
                    (Some(s), Some(t)) => {
                        self.bound[rx] = Some(s.clone());
                        self.unify(&s, &t)
                    }
                    (s, t) => {
                        self.bound[rx] = s.or(t);
                        true
                    }
                }
            }
            (Term::Var { name }, t) | (t, Term::Var { name }) => {
                let i = self.id(name);
                let r = self.find(i);
                match self.bound[r].clone() {
                    Some(s) => self.unify(&s, t),
                    None => {
                        self.bound[r] = Some(t.clone());
                        true
                    }
                }
            }
            (Term::Const { .. }, Term::Const { .. }) => a == b,
            (
                Term::Func { symbol: f, args: xs },
                Term::Func { symbol: g, args: ys },
            ) => f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.unify(x, y)),
            _ => false,
        }
    }

    /// Fully resolved image of a term; `None` on an occurs-check failure.
    fn resolve(&mut self, t: &Term, reps: &HashMap<usize, String>, stack: &mut Vec<usize>) -> Option<Term> {
        match t {
            Term::Var { name } => {
                let Some(&i) = self.idx.get(name) else {
                    return Some(t.clone());
                };
                let r = self.find(i);
                match self.bound[r].clone() {
                    Some(b) => {
                        if stack.contains(&r) {
                            return None;
                        }
                        stack.push(r);
                        let out = self.resolve(&b, reps, stack);
                        stack.pop();
                        out
                    }
                    None => Some(Term::var(reps[&r].clone())),
                }
            }
            Term::Const { .. } => Some(t.clone()),
            Term::Func { symbol, args } => {
                let args = args
                    .iter()
                    .map(|a| self.resolve(a, reps, stack))
                    .collect::<Option<Vec<_>>>()?;
                Some(Term::func(symbol.clone(), args))
            }
        }
    }
}

/// Most general unifier of the given atom pairs. Each class of variables is
/// represented by its bound term if any, otherwise by a head variable if the
/// class has one (smallest name first), otherwise by its smallest body variable.
pub fn mgu(pairs: &[(&Atom, &Atom)], head_vars: &BTreeSet<String>) -> Option<Substitution> {
    let mut cls = Classes::default();
    for (b, h) in pairs {
        if b.predicate != h.predicate || b.args.len() != h.args.len() {
            return None;
        }
        for (x, y) in b.args.iter().zip(&h.args) {
            let mut vs = indexmap::IndexSet::new();
            x.collect_vars(&mut vs);
            y.collect_vars(&mut vs);
            for v in vs {
                cls.id(v);
            }
            if !cls.unify(x, y) {
                return None;
            }
        }
    }
    let mut reps: HashMap<usize, String> = HashMap::new();
    for i in 0..cls.names.len() {
        let r = cls.find(i);
        let name = &cls.names[i];
        let key = |n: &str| (!head_vars.contains(n), n.to_string());
        match reps.get(&r) {
            Some(cur) if key(cur) <= key(name) => {}
            _ => {
                reps.insert(r, name.clone());
            }
        }
    }
    let mut sub = Substitution::new();
    for i in 0..cls.names.len() {
        let name = cls.names[i].clone();
        let image = cls.resolve(&Term::var(name.clone()), &reps, &mut Vec::new())?;
        if image != Term::var(name.clone()) {
            sub.insert(name, image);
        }
    }
    Some(sub)
}

/// Pushes, in mixed-radix order with the last body atom most significant,
/// every non-empty choice of head atoms whose pairs still unify. Slots from
/// `left` on are fixed; a failing prefix prunes all its extensions.
#[allow(clippy::too_many_arguments)]
fn feasible_choices(
    head: &Rule,
    body: &Rule,
    candidates: &[Vec<usize>],
    lo: &[usize],
    left: usize,
    cls: &Classes,
    choice: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if left == 0 {
        if choice.iter().any(|&c| c > 0) {
            out.push(choice.clone());
        }
        return;
    }
    let k = left - 1;
    for c in lo[k]..=candidates[k].len() {
        choice[k] = c;
        if c == 0 {
            feasible_choices(head, body, candidates, lo, k, cls, choice, out);
            continue;
        }
        let (b, h) = (&body.body[k], &head.head[candidates[k][c - 1]]);
        let mut next = cls.clone();
        if b.args.iter().zip(&h.args).all(|(x, y)| next.unify(x, y)) {
            feasible_choices(head, body, candidates, lo, k, &next, choice, out);
        }
    }
    choice[k] = lo[k];
}

fn class_of<'a>(sub: &Substitution, vars: impl Iterator<Item = &'a str>, target: &Term) -> Vec<&'a str> {
    vars.filter(|v| sub.apply_term(&Term::var(*v)) == *target).collect()
}

/// Enumerates the most general unifiers of non-empty subsets of `body.body`
/// with subsets of `head.head`. The rules must not share variables.
pub fn unifiers(head: &Rule, body: &Rule, mode: Mode, cap: usize) -> Result<Vec<Unifier>, BudgetExceeded> {
    unifiers_covering(head, body, None, mode, cap)
}

/// As [`unifiers`], keeping only those whose body part contains `required`.
pub fn unifiers_covering(
    head: &Rule,
    body: &Rule,
    required: Option<usize>,
    mode: Mode,
    cap: usize,
) -> Result<Vec<Unifier>, BudgetExceeded> {
    debug_assert!(head.vars().is_disjoint(&body.vars()), "rules must be standardized apart");
    let candidates: Vec<Vec<usize>> = body
        .body
        .iter()
        .map(|b| {
            head.head
                .iter()
                .enumerate()
                .filter(|(_, h)| h.predicate == b.predicate && h.arity() == b.arity())
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let lo: Vec<usize> = (0..candidates.len()).map(|k| usize::from(required == Some(k))).collect();
    if required.is_some_and(|b| candidates[b].is_empty()) {
        return Ok(Vec::new());
    }
    let needed = candidates
        .iter()
        .zip(&lo)
        .fold(1usize, |acc, (c, l)| acc.saturating_mul(c.len() + 1 - l))
        - usize::from(required.is_none());
    if needed > cap {
        return Err(BudgetExceeded { needed, cap });
    }
    let head_vars = head.vars();
    let existentials = head.existential_set();
    let body_vars: Vec<String> = vars_of(&body.body).into_iter().map(str::to_string).collect();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut leaves = Vec::new();
    feasible_choices(head, body, &candidates, &lo, candidates.len(), &Classes::default(), &mut lo.clone(), &mut leaves);
    'outer: for choice in leaves {
        let pairs: Vec<(usize, usize)> = choice
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (b, candidates[b][c - 1]))
            .collect();
        let atom_pairs: Vec<(&Atom, &Atom)> = pairs
            .iter()
            .map(|&(b, h)| (&body.body[b], &head.head[h]))
            .collect();
        let Some(subst) = mgu(&atom_pairs, &head_vars) else {
            continue;
        };
        let body_part: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let head_part: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
        let head_part: Vec<usize> = head_part.into_iter().collect();

        let touched_head: BTreeSet<&str> = head_part
            .iter()
            .flat_map(|&h| head.head[h].vars())
            .collect();
        for z in existentials.iter().filter(|z| touched_head.contains(z.as_str())) {
            let image = subst.apply_term(&Term::var(z.clone()));
            if !image.is_var() {
                continue 'outer;
            }
            let head_class = class_of(&subst, head_vars.iter().map(String::as_str), &image);
            if head_class.len() != 1 {
                continue 'outer;
            }
            if mode == Mode::Piece {
                for x in class_of(&subst, body_vars.iter().map(String::as_str), &image) {
                    let separating = body
                        .body
                        .iter()
                        .enumerate()
                        .any(|(i, a)| a.contains_var(x) && !body_part.contains(&i));
                    if separating {
                        continue 'outer;
                    }
                }
            }
        }
        if seen.insert((body_part.clone(), head_part.clone(), subst.clone())) {
            out.push(Unifier {
                head_rule: head.id.clone(),
                body_rule: body.id.clone(),
                pairs,
                body_part,
                head_part,
                subst,
            });
        }
    }
    Ok(out)
}
