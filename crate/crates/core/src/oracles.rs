//! Brute-force reference implementations for differential testing. They
//! refuse inputs beyond their budget instead of approximating.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chase::{run_chase, ChaseConfig, HaltStatus};
use crate::logic::{Atom, Rule, RuleSet, Substitution, Term};
use crate::unify::{Mode, Unifier};

pub use crate::unify::{dependency_oracle, OracleVerdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_nodes: usize,
    pub max_cycle_len: usize,
    /// Candidate substitutions examined by the unifier oracle.
    pub max_subsets: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_nodes: 14,
            max_cycle_len: 14,
            max_subsets: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("input exceeds the oracle budget")]
pub struct BudgetRefused;

/// Every elementary cycle through `node` whose nodes all satisfy `marked`,
/// each starting at `node`.
pub fn naive_marked_cycles(
    adj: &[Vec<usize>],
    marked: &[bool],
    node: usize,
    budget: OracleBudget,
) -> Result<Vec<Vec<usize>>, BudgetRefused> {
    if adj.len() > budget.max_nodes {
        return Err(BudgetRefused);
    }
    fn dfs(adj: &[Vec<usize>], marked: &[bool], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, max: usize) {
        let last = *path.last().unwrap();
        for &w in &adj[last] {
            if w == path[0] {
                out.push(path.clone());
            } else if marked[w] && !path.contains(&w) && path.len() < max {
                path.push(w);
                dfs(adj, marked, path, out, max);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if marked[node] {
        dfs(adj, marked, &mut vec![node], &mut out, budget.max_cycle_len);
    }
    Ok(out)
}

fn constants_in(atoms: &[&Atom], out: &mut BTreeSet<Term>) {
    for a in atoms {
        for t in &a.args {
            if let Term::Const { .. } = t {
                out.insert(t.clone());
            }
        }
    }
}

/// Whether `specific` is an instance of `general` on `vars`: some θ with
/// `specific(v) = θ(general(v))` for all `v`.
pub fn is_instance(specific: &Substitution, general: &Substitution, vars: &BTreeSet<String>) -> bool {
    fn matches(pattern: &Term, target: &Term, theta: &mut Substitution) -> bool {
        match (pattern, target) {
            (Term::Var { name }, _) => match theta.get(name) {
                Some(t) => t == target,
                None => {
                    theta.insert(name.clone(), target.clone());
                    true
                }
            },
            (Term::Const { .. }, _) => pattern == target,
            (Term::Func { symbol: f, args: a }, Term::Func { symbol: g, args: b }) => {
                f == g && a.len() == b.len() && a.iter().zip(b).all(|(x, y)| matches(x, y, theta))
            }
            _ => false,
        }
    }
    let mut theta = Substitution::new();
    vars.iter().all(|v| {
        let t = Term::var(v.clone());
        matches(&general.apply_term(&t), &specific.apply_term(&t), &mut theta)
    })
}

/// A unifier found by exhaustive search: body subset, head subset and substitution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RawUnifier {
    pub body_part: Vec<usize>,
    pub head_part: Vec<usize>,
    pub subst: Substitution,
}

/// The class condition of `mode`, checked on an arbitrary substitution.
pub fn satisfies_mode(head: &Rule, body: &Rule, body_part: &[usize], subst: &Substitution, mode: Mode) -> bool {
    let existentials = head.existential_set();
    let head_vars = head.vars();
    let body_vars = body.vars();
    let outside: BTreeSet<&str> = (0..body.body.len())
        .filter(|k| !body_part.contains(k))
        .flat_map(|k| body.body[k].vars())
        .collect();
    let img = |v: &str| subst.apply_term(&Term::var(v.to_string()));
    for z in &existentials {
        let image = img(z);
        if !image.is_var() {
            return false;
        }
        if head_vars.iter().any(|w| w != z && img(w) == image) {
            return false;
        }
        if mode == Mode::Piece && body_vars.iter().any(|x| img(x) == image && outside.contains(x.as_str())) {
            return false;
        }
    }
    true
}

/// All unifiers of a body subset of `body` with a head subset of `head`
/// whose images range over the rule constants and canonically numbered fresh
/// variables. Rules must not share variables.
pub fn exhaustive_unifiers(head: &Rule, body: &Rule, budget: OracleBudget) -> Result<Vec<RawUnifier>, BudgetRefused> {
    let (nb, nh) = (body.body.len(), head.head.len());
    if nb + nh > 12 {
        return Err(BudgetRefused);
    }
    let mut out = Vec::new();
    let mut examined = 0usize;
    for bmask in 1u32..(1 << nb) {
        for hmask in 1u32..(1 << nh) {
            let bpart: Vec<usize> = (0..nb).filter(|k| bmask & (1 << k) != 0).collect();
            let hpart: Vec<usize> = (0..nh).filter(|k| hmask & (1 << k) != 0).collect();
            let preds_b: BTreeSet<&str> = bpart.iter().map(|&k| body.body[k].predicate.as_str()).collect();
            let preds_h: BTreeSet<&str> = hpart.iter().map(|&k| head.head[k].predicate.as_str()).collect();
            if preds_b != preds_h {
                continue;
            }
            let atoms: Vec<&Atom> = bpart
                .iter()
                .map(|&k| &body.body[k])
                .chain(hpart.iter().map(|&k| &head.head[k]))
                .collect();
            let vars: Vec<String> = atoms
                .iter()
                .flat_map(|a| a.vars())
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut consts = BTreeSet::new();
            constants_in(&atoms, &mut consts);
            let consts: Vec<Term> = consts.into_iter().collect();
            let mut assign = Substitution::new();
            assign_all(&vars, 0, 0, &consts, &mut assign, &mut examined, budget.max_subsets, &mut |s| {
                let bimg: BTreeSet<Atom> = bpart.iter().map(|&k| s.apply_atom(&body.body[k])).collect();
                let himg: BTreeSet<Atom> = hpart.iter().map(|&k| s.apply_atom(&head.head[k])).collect();
                if bimg == himg {
                    out.push(RawUnifier {
                        body_part: bpart.clone(),
                        head_part: hpart.clone(),
                        subst: s.clone(),
                    });
                }
            })?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn assign_all(
    vars: &[String],
    i: usize,
    used: usize,
    consts: &[Term],
    s: &mut Substitution,
    examined: &mut usize,
    cap: usize,
    visit: &mut dyn FnMut(&Substitution),
) -> Result<(), BudgetRefused> {
    *examined += 1;
    if *examined > cap {
        return Err(BudgetRefused);
    }
    if i == vars.len() {
        visit(s);
        return Ok(());
    }
    let fresh = |k: usize| Term::var(format!("#v{k}"));
    for t in consts.iter().cloned().chain((0..=used).map(fresh)) {
        let grows = t == fresh(used);
        s.insert(vars[i].clone(), t);
        assign_all(vars, i + 1, used + usize::from(grows), consts, s, examined, cap, visit)?;
    }
    s.remove(&vars[i]);
    Ok(())
}

/// Every exhaustive unifier meeting the class condition of `mode` must be an
/// instance of some enumerated most general unifier. Returns the first
/// counterexample.
pub fn unifier_completeness(
    head: &Rule,
    body: &Rule,
    enumerated: &[Unifier],
    mode: Mode,
    budget: OracleBudget,
) -> Result<Option<RawUnifier>, BudgetRefused> {
    for raw in exhaustive_unifiers(head, body, budget)? {
        if !satisfies_mode(head, body, &raw.body_part, &raw.subst, mode) {
            continue;
        }
        let covered = enumerated.iter().any(|mu| {
            let vars: BTreeSet<String> = mu
                .body_part
                .iter()
                .flat_map(|&k| body.body[k].vars())
                .chain(mu.head_part.iter().flat_map(|&k| head.head[k].vars()))
                .map(str::to_string)
                .collect();
            mu.body_part == raw.body_part && is_instance(&raw.subst, &mu.subst, &vars)
        });
        if !covered {
            return Ok(Some(raw));
        }
    }
    Ok(None)
}

/// Random ground facts over the predicates of `rules`.
pub fn random_facts(rules: &RuleSet, atoms: usize, constants: usize, seed: u64) -> Vec<Atom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signature: Vec<(String, usize)> = rules.signature().into_iter().collect();
    if signature.is_empty() {
        return Vec::new();
    }
    let names: Vec<String> = (0..constants.max(1)).map(|k| format!("k{k}")).collect();
    (0..atoms)
        .map(|_| {
            let (p, n) = signature.choose(&mut rng).unwrap();
            let args = (0..*n).map(|_| Term::constant(names[rng.gen_range(0..names.len())].clone())).collect();
            Atom::new(p.clone(), args)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProbeStats {
    pub samples: usize,
    pub fixpoints: usize,
    pub budget_exhausted: usize,
    pub cyclic_terms: usize,
}

/// Runs the chase from every sample and counts how each run halted.
pub fn termination_probe(rules: &RuleSet, samples: &[Vec<Atom>], cfg: ChaseConfig) -> ProbeStats {
    let mut stats = ProbeStats {
        samples: samples.len(),
        ..ProbeStats::default()
    };
    for facts in samples {
        match run_chase(facts, rules, cfg).map(|d| d.status) {
            Ok(HaltStatus::Fixpoint) => stats.fixpoints += 1,
            Ok(HaltStatus::CyclicTermFound) => stats.cyclic_terms += 1,
            Ok(HaltStatus::BudgetExhausted) | Err(_) => stats.budget_exhausted += 1,
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::ChaseVariant;
    use crate::graphs::find_cycle_through;
    use crate::parser::parse_rules;
    use crate::unify::{rename_apart, unifiers, DEFAULT_UNIFIER_CAP};

    #[test]
    fn cycles_in_small_graphs() {
        let adj = vec![vec![1], vec![0, 2], vec![0]];
        let all = vec![true; 3];
        let cycles = naive_marked_cycles(&adj, &all, 0, OracleBudget::default()).unwrap();
        assert_eq!(cycles, vec![vec![0, 1], vec![0, 1, 2]]);
        let masked = [true, true, false];
        assert_eq!(naive_marked_cycles(&adj, &masked, 0, OracleBudget::default()).unwrap().len(), 1);
        assert!(find_cycle_through(&adj, 0, Some(&masked)).is_some());
        let acyclic = vec![vec![1], vec![2], vec![]];
        assert!(naive_marked_cycles(&acyclic, &all, 0, OracleBudget::default()).unwrap().is_empty());
    }

    #[test]
    fn mgus_cover_all_unifiers() {
        let rs = parse_rules("[R1] p(X1,Y1) -> q(Y1,Z1). [R2] q(X2,Y2), q(Y2,W2) -> r(X2).").unwrap();
        let body = rename_apart(rs.get(1), &rs.get(0).vars());
        for mode in [Mode::Plain, Mode::Piece] {
            let mgus = unifiers(rs.get(0), &body, mode, DEFAULT_UNIFIER_CAP).unwrap();
            let miss = unifier_completeness(rs.get(0), &body, &mgus, mode, OracleBudget::default()).unwrap();
            assert!(miss.is_none(), "{mode:?} {miss:?}");
        }
    }

    #[test]
    fn probe_counts_halts() {
        let grow = parse_rules("[R] p(X,Y) -> p(X,Z).").unwrap();
        let samples: Vec<Vec<Atom>> = (0..5).map(|s| random_facts(&grow, 3, 2, s)).collect();
        let obl = ChaseConfig {
            max_steps: 50,
            ..ChaseConfig::new(ChaseVariant::Oblivious)
        };
        assert_eq!(termination_probe(&grow, &samples, obl).fixpoints, 0);
        let sk = termination_probe(&grow, &samples, ChaseConfig::new(ChaseVariant::Skolem));
        assert_eq!(sk.fixpoints, 5);
        let empty = termination_probe(&RuleSet::empty(), &[vec![]], ChaseConfig::default());
        assert_eq!(empty.fixpoints, 1);
    }
}
