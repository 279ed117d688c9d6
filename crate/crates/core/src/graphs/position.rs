use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Grd;
use crate::logic::{RuleSet, Side, Term};
use crate::par::Exec;
use crate::unify::{agglomerated_rule, u_edge_pairs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "basic")]
    Basic,
    F,
    D,
    U,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Basic => "basic",
            Variant::F => "F",
            Variant::D => "D",
            Variant::U => "U",
        })
    }
}

/// `[a, i]`: argument `arg` (1-based) of atom `atom` on one side of a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub rule: usize,
    pub side: Side,
    pub atom: usize,
    pub arg: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgNode {
    pub name: String,
    pub position: Position,
    pub predicate: String,
    pub term: Term,
    pub existential: bool,
    pub frontier: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Internal,
    Transition,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PgEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Kept without proof because some budget ran out.
    #[serde(default)]
    pub assumed: bool,
}

#[derive(Serialize, Deserialize)]
struct PgData {
    variant: Variant,
    rule_ids: Vec<String>,
    nodes: Vec<PgNode>,
    edges: Vec<PgEdge>,
}

/// Position graph over all rules of a set, with one of the transition-edge
/// policies of [`Variant`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "PgData", into = "PgData")]
pub struct PositionGraph {
    pub variant: Variant,
    pub rule_ids: Vec<String>,
    pub nodes: Vec<PgNode>,
    pub edges: Vec<PgEdge>,
    index: HashMap<Position, usize>,
    succ: Vec<Vec<usize>>,
}

impl From<PgData> for PositionGraph {
    fn from(d: PgData) -> Self {
        PositionGraph::from_parts(d.variant, d.rule_ids, d.nodes, d.edges)
    }
}

impl From<PositionGraph> for PgData {
    fn from(g: PositionGraph) -> Self {
        PgData {
            variant: g.variant,
            rule_ids: g.rule_ids,
            nodes: g.nodes,
            edges: g.edges,
        }
    }
}

pub fn position_name(rule_id: &str, p: Position) -> String {
    let side = match p.side {
        Side::Body => 'b',
        Side::Head => 'h',
    };
    format!("{rule_id}.{side}{}.{}", p.atom, p.arg)
}

fn basic_nodes(rules: &RuleSet) -> (Vec<PgNode>, Vec<PgEdge>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (r, rule) in rules.iter().enumerate() {
        let frontier: BTreeSet<String> = rule.frontier().into_iter().collect();
        let existential = rule.existential_set();
        let start = nodes.len();
        for side in [Side::Body, Side::Head] {
            for (a, atom) in rule.atoms(side).iter().enumerate() {
                for (i, t) in atom.args.iter().enumerate() {
                    let position = Position {
                        rule: r,
                        side,
                        atom: a,
                        arg: i + 1,
                    };
                    let var = t.as_var();
                    nodes.push(PgNode {
                        name: position_name(&rule.id, position),
                        position,
                        predicate: atom.predicate.clone(),
                        term: t.clone(),
                        existential: side == Side::Head && var.is_some_and(|v| existential.contains(v)),
                        frontier: var.is_some_and(|v| frontier.contains(v)),
                    });
                }
            }
        }
        let own = start..nodes.len();
        for b in own.clone() {
            let nb = &nodes[b];
            if nb.position.side != Side::Body || !nb.frontier {
                continue;
            }
            for h in own.clone() {
                let nh = &nodes[h];
                if nh.position.side == Side::Head && (nh.term == nb.term || nh.existential) {
                    edges.push(PgEdge {
                        from: b,
                        to: h,
                        kind: EdgeKind::Internal,
                        assumed: false,
                    });
                }
            }
        }
    }
    (nodes, edges)
}

impl PositionGraph {
    pub fn from_parts(variant: Variant, rule_ids: Vec<String>, nodes: Vec<PgNode>, mut edges: Vec<PgEdge>) -> Self {
        edges.sort();
        edges.dedup_by(|a, b| a.from == b.from && a.to == b.to && a.kind == b.kind);
        let index = nodes.iter().enumerate().map(|(i, n)| (n.position, i)).collect();
        let mut succ = vec![Vec::new(); nodes.len()];
        for e in &edges {
            succ[e.from].push(e.to);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        PositionGraph {
            variant,
            rule_ids,
            nodes,
            edges,
            index,
            succ,
        }
    }

    /// Builds the basic graph plus the transition edges of `variant`. The
    /// dependency graph is only consulted for `D` and `U`.
    pub fn build(rules: &RuleSet, variant: Variant, grd: &Grd, cap: usize, exec: Exec) -> Self {
        let (nodes, mut edges) = basic_nodes(rules);
        let rule_ids = rules.iter().map(|r| r.id.clone()).collect();
        if variant == Variant::Basic {
            return PositionGraph::from_parts(variant, rule_ids, nodes, edges);
        }
        let n = rules.len();
        let mut at: HashMap<Position, usize> = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            at.insert(node.position, i);
        }
        let per_pair = exec.map_range(n * n, |k| {
            let (i, j) = (k / n, k % n);
            let (ri, rj) = (rules.get(i), rules.get(j));
            let shares = ri
                .head
                .iter()
                .any(|h| rj.body.iter().any(|b| b.predicate == h.predicate));
            if !shares {
                return Vec::new();
            }
            // (head atom, body atom, assumed)
            let all_pairs = || {
                let mut v = Vec::new();
                for (ha, h) in ri.head.iter().enumerate() {
                    for (ba, b) in rj.body.iter().enumerate() {
                        if h.predicate == b.predicate && h.arity() == b.arity() {
                            v.push((ha, ba));
                        }
                    }
                }
                v
            };
            match variant {
                Variant::F => all_pairs().into_iter().map(|(h, b)| (h, b, false)).collect(),
                Variant::D => {
                    if grd.reaches(i, j) {
                        let assumed = grd.reach_is_assumed(i, j);
                        all_pairs().into_iter().map(|(h, b)| (h, b, assumed)).collect()
                    } else {
                        Vec::new()
                    }
                }
                Variant::U => {
                    if !grd.reaches(i, j) {
                        return Vec::new();
                    }
                    let agg = agglomerated_rule(rules, grd, i, j, cap);
                    match agg.and_then(|a| u_edge_pairs(&a, rj, cap)) {
                        Ok(pairs) => pairs.into_iter().map(|(h, b)| (h, b, false)).collect(),
                        Err(_) => all_pairs().into_iter().map(|(h, b)| (h, b, true)).collect(),
                    }
                }
                Variant::Basic => unreachable!(),
            }
            .into_iter()
            .map(|(h, b, assumed)| (i, h, j, b, assumed))
            .collect::<Vec<_>>()
        });
        for (i, ha, j, ba, assumed) in per_pair.into_iter().flatten() {
            let arity = rules.get(i).head[ha].arity();
            for k in 1..=arity {
                let from = at[&Position {
                    rule: i,
                    side: Side::Head,
                    atom: ha,
                    arg: k,
                }];
                let to = at[&Position {
                    rule: j,
                    side: Side::Body,
                    atom: ba,
                    arg: k,
                }];
                edges.push(PgEdge {
                    from,
                    to,
                    kind: EdgeKind::Transition,
                    assumed,
                });
            }
        }
        PositionGraph::from_parts(variant, rule_ids, nodes, edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, p: Position) -> Option<usize> {
        self.index.get(&p).copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.succ
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.succ[from].binary_search(&to).is_ok()
    }

    pub fn transition_edges(&self) -> impl Iterator<Item = &PgEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Transition)
    }

    pub fn existential_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].existential)
    }

    pub fn has_assumed_edges(&self) -> bool {
        self.edges.iter().any(|e| e.assumed)
    }

    /// Body positions of rule `rule` whose term is `var`.
    pub fn body_positions_of(&self, rule: usize, var: &str) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                n.position.rule == rule && n.position.side == Side::Body && n.term.as_var() == Some(var)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether some node of `from` reaches `to` without passing through an
    /// existential node other than the starting ones.
    pub fn reaches_avoiding_existentials(&self, from: &[usize], to: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = from.to_vec();
        for &s in from {
            seen[s] = true;
        }
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if self.nodes[v].existential && !from.contains(&v) {
                continue;
            }
            for &w in &self.succ[v] {
                if w == to {
                    return true;
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Transition edges as (head node, body node) pairs.
    pub fn transition_set(&self) -> BTreeSet<(usize, usize)> {
        self.transition_edges().map(|e| (e.from, e.to)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::cycles::has_cycle_through;
    use crate::parser::parse_rules;
    use crate::unify::DEFAULT_UNIFIER_CAP;

    fn graphs(text: &str) -> (PositionGraph, PositionGraph, PositionGraph) {
        let rs = parse_rules(text).unwrap();
        let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        let b = |v| PositionGraph::build(&rs, v, &grd, DEFAULT_UNIFIER_CAP, Exec::Sequential);
        (b(Variant::F), b(Variant::D), b(Variant::U))
    }

    fn cyclic(g: &PositionGraph) -> bool {
        (0..g.len()).any(|v| has_cycle_through(g.adjacency(), v, None))
    }

    #[test]
    fn basic_edges() {
        let (f, _, _) = graphs("[R1] h(X) -> p(X,Y).");
        let names: Vec<_> = f.edges.iter().map(|e| (f.nodes[e.from].name.as_str(), f.nodes[e.to].name.as_str())).collect();
        assert_eq!(names, vec![("R1.b0.1", "R1.h0.1"), ("R1.b0.1", "R1.h0.2")]);
        assert!(f.nodes[f.node_by_name("R1.h0.2").unwrap()].existential);
        let (g, _, _) = graphs("[R] p(X) -> q(Y).");
        assert!(g.edges.is_empty());
    }

    #[test]
    fn dependency_removes_cycle() {
        let (f, d, u) = graphs("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).");
        assert!(cyclic(&f));
        assert!(!cyclic(&d));
        assert!(!cyclic(&u));
        assert_eq!(f.transition_edges().count(), 3);
        assert_eq!(d.transition_edges().count(), 1);
    }

    #[test]
    fn unifiers_remove_cycle() {
        let (f, d, u) = graphs("[R1] t(X,Y) -> p(Z,Y), q(Y). [R2] p(U,V), q(U) -> t(V,W).");
        assert!(cyclic(&d));
        assert!(!cyclic(&u));
        assert!(u.transition_set().is_subset(&d.transition_set()));
        assert!(d.transition_set().is_subset(&f.transition_set()));
        let p = |n: &str| u.node_by_name(n).unwrap();
        assert!(!u.has_edge(p("R1.h0.2"), p("R2.b0.2")));
        assert!(u.has_edge(p("R1.h1.1"), p("R2.b1.1")));
    }

    #[test]
    fn json_round_trip() {
        let (_, _, u) = graphs("[R1] t(X,Y) -> p(Z,Y), q(Y). [R2] p(U,V), q(U) -> t(V,W).");
        let text = serde_json::to_string(&u).unwrap();
        let back: PositionGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, u);
    }
}
