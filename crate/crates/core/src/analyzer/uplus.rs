//! Marked closed walks of the unifier-aware position graph that admit a
//! compatible induced unifier sequence.

use std::collections::{HashSet, VecDeque};
use std::ops::ControlFlow;

use crate::graphs::{EdgeKind, PositionGraph};
use crate::logic::{Atom, RuleSet, Side, Term};
use crate::markings::{MarkingContext, Property, Verdict, Witness};
use crate::par::Exec;
use crate::unify::{compose, is_compatible, rename_apart, unifiers_covering, Composed, Mode, Unifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Unifiers per enumeration step.
    pub unifier_cap: usize,
    /// Walk states explored per existential position.
    pub sequence_nodes: usize,
    /// Longest walk, in position nodes.
    pub walk_length: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            unifier_cap: crate::unify::DEFAULT_UNIFIER_CAP,
            sequence_nodes: 5_000,
            walk_length: 64,
        }
    }
}

enum Search {
    Found(Vec<usize>, Vec<String>),
    OutOfBudget,
}

fn describe(mu: &Unifier) -> String {
    let map: Vec<String> = mu.subst.iter().map(|(v, t)| format!("{v}->{t}")).collect();
    format!("{} into {}: {{{}}}", mu.body_rule, mu.head_rule, map.join(", "))
}

/// A string equal for composed rules that coincide up to variable renaming
/// and atom order, for the common cases.
fn state_key(c: &Composed) -> String {
    let shape = |a: &Atom| -> String {
        let args: Vec<String> = a
            .args
            .iter()
            .map(|t| match t {
                Term::Var { .. } => "_".to_string(),
                other => other.to_string(),
            })
            .collect();
        format!("{}({})", a.predicate, args.join(","))
    };
    let mut tagged: Vec<(String, &Atom)> = Vec::new();
    tagged.extend(c.rule.body.iter().map(|a| (format!("b {}", shape(a)), a)));
    tagged.extend(c.rule.negative.iter().map(|a| (format!("n {}", shape(a)), a)));
    for (a, o) in c.rule.head.iter().zip(&c.origins) {
        tagged.push((format!("h{o:?} {}", shape(a)), a));
    }
    tagged.sort_by(|x, y| x.0.cmp(&y.0));
    let mut names: Vec<&str> = Vec::new();
    let mut out = String::new();
    for (tag, a) in tagged {
        out.push_str(&tag);
        for t in &a.args {
            if let Some(v) = t.as_var() {
                let k = names.iter().position(|n| *n == v).unwrap_or_else(|| {
                    names.push(v);
                    names.len() - 1
                });
                out.push_str(&format!(" {k}"));
            }
        }
        out.push(';');
    }
    out
}

/// One reached walk state; the walk itself is recovered through `parent`.
struct Step {
    node: usize,
    parent: Option<usize>,
    unifier: Option<String>,
}

struct WalkSearch<'a> {
    rules: &'a RuleSet,
    pg: &'a PositionGraph,
    adj: &'a [Vec<usize>],
    marked: &'a [bool],
    seed: usize,
    negation_aware: bool,
    budget: SearchBudget,
    seen: HashSet<(usize, String)>,
    steps: Vec<Step>,
    queue: VecDeque<(usize, Composed, usize)>,
}

impl WalkSearch<'_> {
    fn walk(&self, mut at: usize) -> (Vec<usize>, Vec<String>) {
        let (mut nodes, mut trail) = (Vec::new(), Vec::new());
        loop {
            let step = &self.steps[at];
            nodes.push(step.node);
            trail.extend(step.unifier.clone());
            match step.parent {
                Some(p) => at = p,
                None => break,
            }
        }
        nodes.reverse();
        trail.reverse();
        (nodes, trail)
    }

    fn push(&mut self, node: usize, parent: usize, unifier: Option<String>, acc: Composed, len: usize) -> ControlFlow<Search> {
        if !self.seen.insert((node, state_key(&acc))) {
            return ControlFlow::Continue(());
        }
        if self.seen.len() > self.budget.sequence_nodes || len > self.budget.walk_length {
            return ControlFlow::Break(Search::OutOfBudget);
        }
        self.steps.push(Step {
            node,
            parent: Some(parent),
            unifier,
        });
        self.queue.push_back((self.steps.len() - 1, acc, len));
        ControlFlow::Continue(())
    }

    /// Breadth-first over walks from the seed, so the shortest closing walk
    /// is reported. Incompatible prefixes are cut: every extension of them is
    /// incompatible too.
    fn run(&mut self, start: Composed) -> ControlFlow<Search> {
        self.seen.insert((self.seed, state_key(&start)));
        self.steps.push(Step {
            node: self.seed,
            parent: None,
            unifier: None,
        });
        self.queue.push_back((0, start, 1));
        while let Some((at, acc, len)) = self.queue.pop_front() {
            let v = self.steps[at].node;
            let here = self.pg.nodes[v].position;
            for &w in &self.adj[v] {
                if w == self.seed {
                    if here.side == Side::Body {
                        let (nodes, trail) = self.walk(at);
                        return ControlFlow::Break(Search::Found(nodes, trail));
                    }
                    continue;
                }
                if !self.marked[w] {
                    continue;
                }
                if here.side == Side::Body {
                    self.push(w, at, None, acc.clone(), len + 1)?;
                    continue;
                }
                let to = self.pg.nodes[w].position;
                let body = rename_apart(self.rules.get(to.rule), &acc.rule.vars());
                let Ok(candidates) = unifiers_covering(&acc.rule, &body, Some(to.atom), Mode::Plain, self.budget.unifier_cap) else {
                    return ControlFlow::Break(Search::OutOfBudget);
                };
                let targets: Vec<usize> = (0..acc.rule.head.len())
                    .filter(|&h| acc.origins[h].contains(&(here.rule, here.atom)))
                    .collect();
                for mu in candidates {
                    if !targets.iter().any(|&h| mu.joins(&body, to.atom, &acc.rule, h)) {
                        continue;
                    }
                    if !is_compatible(&acc, &mu, &body, to.rule, self.pg) {
                        continue;
                    }
                    let next = compose(&acc, &mu, &body, to.rule);
                    // blocking is preserved by every further composition
                    if self.negation_aware && next.rule.is_self_blocking() {
                        continue;
                    }
                    self.push(w, at, Some(describe(&mu)), next, len + 1)?;
                }
            }
        }
        ControlFlow::Continue(())
    }
}

fn uses_assumed(pg: &PositionGraph, walk: &[usize]) -> bool {
    let n = walk.len();
    (0..n).any(|t| {
        let (a, b) = (walk[t], walk[(t + 1) % n]);
        pg.edges
            .iter()
            .filter(|e| e.from == a && e.to == b)
            .all(|e| e.assumed && e.kind == EdgeKind::Transition)
    })
}

enum SeedResult {
    Clean,
    Dangerous(Witness, bool),
    Unknown(String),
}

fn check_seed(
    ctx: &MarkingContext,
    rules: &RuleSet,
    property: Property,
    seed: usize,
    negation_aware: bool,
    budget: SearchBudget,
) -> SeedResult {
    let pg = ctx.graph();
    let marked = ctx.marking(property, seed);
    if !marked[seed] {
        return SeedResult::Clean;
    }
    let start = pg.nodes[seed].position.rule;
    let mut s = WalkSearch {
        rules,
        pg,
        adj: ctx.adjacency(),
        marked: &marked,
        seed,
        negation_aware,
        budget,
        seen: HashSet::new(),
        steps: Vec::new(),
        queue: VecDeque::new(),
    };
    match s.run(Composed::base(start, rules.get(start))) {
        ControlFlow::Break(Search::Found(walk, trail)) => {
            let names = walk.iter().map(|&v| pg.nodes[v].name.clone()).collect();
            let mut w = Witness::new(pg.nodes[seed].name.clone(), names);
            w.unifiers = trail;
            SeedResult::Dangerous(w, uses_assumed(pg, &walk))
        }
        ControlFlow::Break(Search::OutOfBudget) => SeedResult::Unknown(format!(
            "unifier sequence search from {} ran out of budget",
            pg.nodes[seed].name
        )),
        ControlFlow::Continue(()) => SeedResult::Clean,
    }
}

/// No existential position of `pg_u` lies on a marked closed walk inducing a
/// compatible unifier sequence. With `negation_aware`, sequences whose
/// composed rule is self-blocking do not count.
pub fn check_compatible_cycles(
    rules: &RuleSet,
    pg_u: &PositionGraph,
    property: Property,
    negation_aware: bool,
    budget: SearchBudget,
    exec: Exec,
) -> Verdict {
    let ctx = MarkingContext::new(pg_u, rules, false);
    // bounded ranks leave nothing for the walk search to refute
    if property == Property::Ar && ctx.ranked_cycle().is_none() {
        return Verdict::Holds;
    }
    let seeds = ctx.existential_nodes().to_vec();
    // a cheap pass over every seed first, so one expensive seed does not
    // delay a witness sitting at another
    let probe = SearchBudget {
        sequence_nodes: (budget.sequence_nodes / 20).max(1),
        ..budget
    };
    let mut pending = seeds;
    let mut assumed = None;
    let mut exhausted = None;
    for pass_budget in [probe, budget] {
        let check = |&s: &usize| check_seed(&ctx, rules, property, s, negation_aware, pass_budget);
        // sequentially, stop at the first real witness
        let results: Box<dyn Iterator<Item = (usize, SeedResult)>> = match exec {
            Exec::Sequential => Box::new(pending.iter().map(|s| (*s, check(s)))),
            _ => Box::new(pending.iter().copied().zip(exec.map(&pending, check))),
        };
        let mut retry = Vec::new();
        exhausted = None;
        for (seed, r) in results {
            match r {
                SeedResult::Clean => {}
                SeedResult::Dangerous(witness, false) => return Verdict::Fails { witness },
                SeedResult::Dangerous(w, true) => {
                    assumed.get_or_insert(w);
                }
                SeedResult::Unknown(reason) => {
                    retry.push(seed);
                    exhausted.get_or_insert(reason);
                }
            }
        }
        if retry.is_empty() {
            break;
        }
        pending = retry;
    }
    match (assumed, exhausted) {
        (Some(w), _) => Verdict::CannotCertify {
            reason: "compatible cycle uses budget-assumed edges".to_string(),
            witness: Some(w),
        },
        (None, Some(reason)) => Verdict::CannotCertify { reason, witness: None },
        (None, None) => Verdict::Holds,
    }
}
