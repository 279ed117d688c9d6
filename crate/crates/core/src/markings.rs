//! Marking functions over position graphs and the acyclicity properties
//! they induce: no existential position lies on a cycle inside its own marking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graphs::{find_cycle_through, EdgeKind, PositionGraph};
use crate::logic::{RuleSet, Side};
use crate::par::Exec;
use crate::unify::{mgu, rename_apart};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Wa,
    Fd,
    Ar,
    Ja,
    Swa,
}

impl Property {
    /// From strongest to weakest.
    pub const ALL: [Property; 5] = [Property::Wa, Property::Fd, Property::Ar, Property::Ja, Property::Swa];

    pub fn name(self) -> &'static str {
        match self {
            Property::Wa => "wa",
            Property::Fd => "fd",
            Property::Ar => "ar",
            Property::Ja => "ja",
            Property::Swa => "swa",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown property {s}"))
    }
}

/// Per-graph lookup tables shared by all seeds.
pub struct MarkingContext<'a> {
    pg: &'a PositionGraph,
    adj: Vec<Vec<usize>>,
    /// body nodes carrying each (rule, variable)
    var_positions: HashMap<(usize, String), Vec<usize>>,
    /// body nodes grouped by (rule, predicate, argument, variable)
    cover_groups: HashMap<(usize, String, usize, String), Vec<usize>>,
    /// transition edges whose head and body atoms unify
    unifiable: BTreeSet<(usize, usize)>,
    existentials: Vec<usize>,
    frontiers: Vec<Vec<String>>,
}

impl<'a> MarkingContext<'a> {
    /// With `proven_only`, edges flagged as assumed are ignored.
    pub fn new(pg: &'a PositionGraph, rules: &RuleSet, proven_only: bool) -> Self {
        let mut adj = vec![Vec::new(); pg.len()];
        for e in &pg.edges {
            if !(proven_only && e.assumed) {
                adj[e.from].push(e.to);
            }
        }
        for s in &mut adj {
            s.sort_unstable();
            s.dedup();
        }
        let mut var_positions: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        let mut cover_groups: HashMap<(usize, String, usize, String), Vec<usize>> = HashMap::new();
        for (i, n) in pg.nodes.iter().enumerate() {
            if n.position.side != Side::Body {
                continue;
            }
            if let Some(v) = n.term.as_var() {
                var_positions.entry((n.position.rule, v.to_string())).or_default().push(i);
                cover_groups
                    .entry((n.position.rule, n.predicate.clone(), n.position.arg, v.to_string()))
                    .or_default()
                    .push(i);
            }
        }
        let mut unifiable = BTreeSet::new();
        let mut memo: HashMap<(usize, usize, usize, usize), bool> = HashMap::new();
        for e in pg.edges.iter().filter(|e| e.kind == EdgeKind::Transition) {
            let (h, b) = (&pg.nodes[e.from].position, &pg.nodes[e.to].position);
            let ok = *memo.entry((h.rule, h.atom, b.rule, b.atom)).or_insert_with(|| {
                let head_rule = rules.get(h.rule);
                let body_rule = rename_apart(rules.get(b.rule), &head_rule.vars());
                mgu(&[(&body_rule.body[b.atom], &head_rule.head[h.atom])], &BTreeSet::new()).is_some()
            });
            if ok {
                unifiable.insert((e.from, e.to));
            }
        }
        MarkingContext {
            pg,
            adj,
            var_positions,
            cover_groups,
            unifiable,
            existentials: pg.existential_nodes().collect(),
            frontiers: rules.iter().map(|r| r.frontier()).collect(),
        }
    }

    pub fn graph(&self) -> &PositionGraph {
        self.pg
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    fn covered(&self, rule: usize, var: &str, marked: &[bool]) -> bool {
        self.var_positions[&(rule, var.to_string())].iter().all(|&p| {
            let n = &self.pg.nodes[p];
            self.cover_groups[&(rule, n.predicate.clone(), n.position.arg, var.to_string())]
                .iter()
                .any(|&q| marked[q])
        })
    }

    /// The marking of `seed` as a membership vector.
    pub fn marking(&self, property: Property, seed: usize) -> Vec<bool> {
        let mut marked = vec![false; self.pg.len()];
        let mut work = Vec::new();
        let mut fired: BTreeSet<(usize, String)> = BTreeSet::new();
        let add = |v: usize, marked: &mut Vec<bool>, work: &mut Vec<usize>| {
            if !marked[v] {
                marked[v] = true;
                work.push(v);
            }
        };
        // an existential starts from every head position it occupies
        let start = &self.pg.nodes[seed];
        let origins: Vec<usize> = if start.existential {
            (0..self.pg.len())
                .filter(|&v| {
                    let n = &self.pg.nodes[v];
                    n.existential && n.position.rule == start.position.rule && n.term == start.term
                })
                .collect()
        } else {
            vec![seed]
        };
        for &o in &origins {
            for &w in &self.adj[o] {
                // swa seeds only move into atoms their own atom unifies with
                if property != Property::Swa || start.position.side == Side::Body || self.unifiable.contains(&(o, w)) {
                    add(w, &mut marked, &mut work);
                }
            }
        }
        if property == Property::Ar {
            for &e in &self.existentials {
                for &w in &self.adj[e] {
                    add(w, &mut marked, &mut work);
                }
            }
        }
        while let Some(v) = work.pop() {
            let node = &self.pg.nodes[v];
            let head = node.position.side == Side::Head;
            match property {
                Property::Wa => {
                    for &w in &self.adj[v] {
                        add(w, &mut marked, &mut work);
                    }
                    continue;
                }
                Property::Fd => {
                    for &w in &self.adj[v] {
                        if w != seed {
                            add(w, &mut marked, &mut work);
                        }
                    }
                }
                Property::Ar | Property::Ja => {
                    if head {
                        for &w in &self.adj[v] {
                            add(w, &mut marked, &mut work);
                        }
                    }
                }
                Property::Swa => {
                    if head {
                        for &w in &self.adj[v] {
                            if self.unifiable.contains(&(v, w)) {
                                add(w, &mut marked, &mut work);
                            }
                        }
                    }
                }
            }
            if head {
                continue;
            }
            let Some(var) = node.term.as_var() else { continue };
            let key = (node.position.rule, var.to_string());
            if fired.contains(&key) || !self.covered(key.0, var, &marked) {
                continue;
            }
            let positions = self.var_positions[&key].clone();
            fired.insert(key);
            for p in positions {
                for &w in &self.adj[p] {
                    add(w, &mut marked, &mut work);
                }
            }
        }
        marked
    }

    /// A cycle through `seed` lying inside the marking of `seed`; the seed
    /// itself must be marked.
    pub fn marked_cycle(&self, property: Property, seed: usize) -> Option<Vec<usize>> {
        let m = self.marking(property, seed);
        if !m[seed] {
            return None;
        }
        find_cycle_through(&self.adj, seed, Some(&m))
    }

    /// Nodes whose argument rank has no finite bound. A body node ranks as
    /// its highest producer, a frontier head node as the lowest body
    /// position of its variable, and an existential one above every
    /// frontier variable of its rule. Ranks are capped one past the number
    /// of existential nodes, which no finite least solution exceeds.
    pub fn divergent(&self) -> Vec<bool> {
        let n = self.pg.len();
        let cap = self.existentials.len() + 1;
        let mut producers = vec![Vec::new(); n];
        for (v, out) in self.adj.iter().enumerate() {
            if self.pg.nodes[v].position.side == Side::Head {
                for &w in out {
                    producers[w].push(v);
                }
            }
        }
        let mut rank = vec![0usize; n];
        let var_rank = |rank: &[usize], rule: usize, var: &str| {
            self.var_positions
                .get(&(rule, var.to_string()))
                .map_or(0, |ps| ps.iter().map(|&p| rank[p]).min().unwrap_or(0))
        };
        loop {
            let mut changed = false;
            for v in 0..n {
                let node = &self.pg.nodes[v];
                let r = node.position.rule;
                let next = match node.position.side {
                    Side::Body => producers[v].iter().map(|&h| rank[h]).max().unwrap_or(0),
                    Side::Head if node.existential => {
                        1 + self.frontiers[r].iter().map(|x| var_rank(&rank, r, x)).max().unwrap_or(0)
                    }
                    Side::Head => node.term.as_var().map_or(0, |x| var_rank(&rank, r, x)),
                }
                .min(cap);
                if next > rank[v] {
                    rank[v] = next;
                    changed = true;
                }
            }
            if !changed {
                return rank.into_iter().map(|r| r == cap).collect();
            }
        }
    }

    /// An existential node of unbounded rank and a cycle through it among
    /// such nodes.
    pub fn ranked_cycle(&self) -> Option<(usize, Vec<usize>)> {
        let d = self.divergent();
        let mut fallback = None;
        for &e in self.existentials.iter().filter(|&&e| d[e]) {
            match find_cycle_through(&self.adj, e, Some(&d)) {
                Some(c) => return Some((e, c)),
                None => {
                    fallback.get_or_insert((e, vec![e]));
                }
            }
        }
        fallback
    }

    pub fn existential_nodes(&self) -> &[usize] {
        &self.existentials
    }
}

/// Markings of every node, as sorted node-name lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marking {
    pub property: Property,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    pub marks: BTreeMap<String, Vec<String>>,
}

pub fn compute_marking(pg: &PositionGraph, rules: &RuleSet, property: Property) -> Marking {
    let ctx = MarkingContext::new(pg, rules, false);
    let marks = (0..pg.len())
        .map(|v| {
            let m = ctx.marking(property, v);
            let mut names: Vec<String> = (0..pg.len()).filter(|&w| m[w]).map(|w| pg.nodes[w].name.clone()).collect();
            names.sort();
            (pg.nodes[v].name.clone(), names)
        })
        .collect();
    Marking {
        property,
        graph: None,
        marks,
    }
}

/// A cycle refuting a property, starting at `seed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: String,
    pub cycle: Vec<String>,
    /// Unifier sequence induced by the cycle, when one was needed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unifiers: Vec<String>,
}

impl Witness {
    pub fn new(seed: impl Into<String>, cycle: Vec<String>) -> Self {
        Witness {
            seed: seed.into(),
            cycle,
            unifiers: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    /// Refuted using proven edges only.
    Fails { witness: Witness },
    /// Refuted only through budget-assumed edges, or a search ran out of budget.
    CannotCertify {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Witness>,
    },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, Verdict::Fails { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails { .. } => "fails",
            Verdict::CannotCertify { .. } => "cannot_certify",
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Holds => None,
            Verdict::Fails { witness } => Some(witness),
            Verdict::CannotCertify { witness, .. } => witness.as_ref(),
        }
    }
}

fn witness(pg: &PositionGraph, seed: usize, cycle: &[usize]) -> Witness {
    Witness::new(
        pg.nodes[seed].name.clone(),
        cycle.iter().map(|&v| pg.nodes[v].name.clone()).collect(),
    )
}

fn first_cycle(ctx: &MarkingContext, property: Property, exec: Exec) -> Option<(usize, Vec<usize>)> {
    if property == Property::Ar {
        return ctx.ranked_cycle();
    }
    let seeds = ctx.existential_nodes().to_vec();
    let found = exec.map(&seeds, |&s| ctx.marked_cycle(property, s).map(|c| (s, c)));
    found.into_iter().flatten().next()
}

/// Whether no existential position of `pg` has a marked cycle.
pub fn satisfies(pg: &PositionGraph, rules: &RuleSet, property: Property, exec: Exec) -> Verdict {
    let full = MarkingContext::new(pg, rules, false);
    let Some((seed, cycle)) = first_cycle(&full, property, exec) else {
        return Verdict::Holds;
    };
    if !pg.has_assumed_edges() {
        return Verdict::Fails {
            witness: witness(pg, seed, &cycle),
        };
    }
    let proven = MarkingContext::new(pg, rules, true);
    match first_cycle(&proven, property, exec) {
        Some((s, c)) => Verdict::Fails {
            witness: witness(pg, s, &c),
        },
        None => Verdict::CannotCertify {
            reason: "marked cycle uses budget-assumed edges".into(),
            witness: Some(witness(pg, seed, &cycle)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{Grd, Variant};
    use crate::parser::parse_rules;
    use crate::unify::DEFAULT_UNIFIER_CAP;

    fn verdicts(text: &str, variant: Variant) -> Vec<bool> {
        let rs = parse_rules(text).unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let pg = PositionGraph::build(&rs, variant, &grd, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        Property::ALL
            .iter()
            .map(|&p| satisfies(&pg, &rs, p, Exec::Sequential).holds())
            .collect()
    }

    const EX2: &str = "[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).";

    #[test]
    fn weakly_acyclic_fails_on_full_graph() {
        let rs = parse_rules(EX2).unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let pg = PositionGraph::build(&rs, Variant::F, &grd, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let ctx = MarkingContext::new(&pg, &rs, false);
        let y = pg.node_by_name("R1.h0.2").unwrap();
        let m = ctx.marking(Property::Wa, y);
        assert!(m[y]);
        assert!(m[pg.node_by_name("R2.b0.2").unwrap()]);
        assert!(matches!(satisfies(&pg, &rs, Property::Wa, Exec::Sequential), Verdict::Fails { .. }));
        assert_eq!(verdicts(EX2, Variant::D), vec![true; 5]);
    }

    #[test]
    fn joint_acyclicity_needs_all_positions() {
        // X occurs in q and r; only q is fed by the existential
        let text = "[R1] q(X), r(X) -> q(Y), s(X).";
        assert_eq!(verdicts(text, Variant::F), vec![false, true, true, true, true]);
        let text = "[R1] q(X) -> q(Y), s(X).";
        assert_eq!(verdicts(text, Variant::F), vec![false; 5]);
    }

    #[test]
    fn repeated_existential_seeds_every_position() {
        // b(Y,Y) is only covered once both positions of Z are marked
        let text = "[R1] a(X) -> b(Z,Z), c(X). [R2] b(Y,Y) -> a(Y).";
        for variant in [Variant::F, Variant::D, Variant::U] {
            assert_eq!(verdicts(text, variant), vec![false; 5], "{variant}");
        }
    }

    #[test]
    fn no_existentials_always_holds() {
        assert_eq!(verdicts("p(X,Y) -> p(Y,X).", Variant::F), vec![true; 5]);
        assert_eq!(verdicts("", Variant::F), vec![true; 5]);
    }

    #[test]
    fn unification_restricts_swa() {
        // the head p(a,Y) can never feed the body p(b,X)
        let text = "[R1] p(b,X) -> p(a,Y), s(X).";
        let v = verdicts(text, Variant::F);
        assert!(!v[3]);
        assert!(v[4]);
    }

    #[test]
    fn ar_bounds_ranks_where_markings_overshoot() {
        // ranks p0=0, p3[3]=1, p3[2]=2 satisfy every rule
        let text = "[R1] p0(X) -> p3(Z,X,W), p2(W). [R2] p2(X) -> p0(Z). \
                    [R3] p3(b,X,X), p1(Y,Y) -> p3(X,Z,Y), p2(X).";
        assert_eq!(verdicts(text, Variant::F), vec![false, true, true, true, true]);
        let looping = "[R1] p(X,Y) -> p(Y,Z).";
        assert_eq!(verdicts(looping, Variant::F), vec![false; 5]);
        let rs = parse_rules(looping).unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let pg = PositionGraph::build(&rs, Variant::F, &grd, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let (seed, cycle) = MarkingContext::new(&pg, &rs, false).ranked_cycle().unwrap();
        assert!(pg.nodes[seed].existential && cycle.len() >= 2);
    }

    #[test]
    fn ar_markings_coincide_on_existentials() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V) -> h(V), t(U,W).").unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let pg = PositionGraph::build(&rs, Variant::F, &grd, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let ctx = MarkingContext::new(&pg, &rs, false);
        let ex: Vec<usize> = pg.existential_nodes().collect();
        assert!(ex.len() >= 2);
        let first = ctx.marking(Property::Ar, ex[0]);
        assert!(ex.iter().all(|&e| ctx.marking(Property::Ar, e) == first));
    }
}
