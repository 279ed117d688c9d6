//! Classification of a rule set across the acyclicity hierarchy and the
//! chase-termination conclusions it supports.

mod uplus;

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use uplus::{check_compatible_cycles, SearchBudget};

use crate::graphs::{find_cycle_through, scc, Grd, PositionGraph, Variant};
use crate::logic::RuleSet;
use crate::markings::{compute_marking, satisfies, Marking, Property, Verdict, Witness};
use crate::par::Exec;
use crate::unify::{dependency_oracle, OracleVerdict};

pub const REPORT_SCHEMA: &str = "report-v1";

/// Columns of the classification matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphKind {
    F,
    D,
    U,
    #[serde(rename = "U+")]
    UPlus,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] = [GraphKind::F, GraphKind::D, GraphKind::U, GraphKind::UPlus];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::F => "F",
            GraphKind::D => "D",
            GraphKind::U => "U",
            GraphKind::UPlus => "U+",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        GraphKind::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown graph {s}"))
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub classes: Vec<Property>,
    pub graphs: Vec<GraphKind>,
    /// Evaluate every cell instead of inferring holds from the column to the left.
    pub full: bool,
    pub budget: SearchBudget,
    /// Cross-check every GRD edge with the semantic dependency oracle.
    pub oracle: bool,
    pub dump_markings: bool,
    pub exec: Exec,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            classes: Property::ALL.to_vec(),
            graphs: GraphKind::ALL.to_vec(),
            full: false,
            budget: SearchBudget::default(),
            oracle: false,
            dump_markings: false,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub class: Property,
    pub graph: GraphKind,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Holds because the cell to its left holds; not evaluated.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inferred: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Termination {
    pub oblivious: bool,
    pub skolem: bool,
    pub restricted: bool,
    /// Cells backing the skolem conclusion, e.g. `wa^D`.
    pub certified_by: Vec<String>,
    pub summary: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub rules: usize,
    pub grd_edges: usize,
    pub assumed_grd_edges: usize,
    pub position_nodes: usize,
    pub edges_f: usize,
    pub edges_d: usize,
    pub edges_u: usize,
    pub assumed_u_edges: usize,
    pub millis_graphs: u128,
    pub millis_matrix: u128,
    pub cannot_certify_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinableEdge {
    pub from: String,
    pub to: String,
    pub oracle: OracleVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub agrd: Verdict,
    pub r_acyclic: Verdict,
    pub matrix: Vec<Cell>,
    /// Compatible cycles that are not self-blocking, per class.
    pub nme: Vec<Cell>,
    pub termination: Termination,
    pub telemetry: Telemetry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinable_edges: Vec<RefinableEdge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markings: Vec<Marking>,
}

impl AnalysisReport {
    pub fn cell(&self, class: Property, graph: GraphKind) -> Option<&Verdict> {
        self.matrix
            .iter()
            .find(|c| c.class == class && c.graph == graph)
            .map(|c| &c.verdict)
    }

    pub fn nme(&self, class: Property) -> Option<&Verdict> {
        self.nme.iter().find(|c| c.class == class).map(|c| &c.verdict)
    }
}

/// Graphs shared by all checks.
pub struct Graphs {
    pub grd: Grd,
    pub f: PositionGraph,
    pub d: PositionGraph,
    pub u: PositionGraph,
}

impl Graphs {
    pub fn build(rules: &RuleSet, cap: usize, exec: Exec) -> Self {
        let grd = Grd::build(rules, cap, exec);
        let f = PositionGraph::build(rules, Variant::F, &grd, cap, exec);
        let d = PositionGraph::build(rules, Variant::D, &grd, cap, exec);
        let u = PositionGraph::build(rules, Variant::U, &grd, cap, exec);
        Graphs { grd, f, d, u }
    }

    pub fn get(&self, g: GraphKind) -> &PositionGraph {
        match g {
            GraphKind::F => &self.f,
            GraphKind::D => &self.d,
            GraphKind::U | GraphKind::UPlus => &self.u,
        }
    }
}

fn rule_cycle_verdict(grd: &Grd, rules: &RuleSet, on: impl Fn(usize) -> bool) -> Verdict {
    let proven: Vec<Vec<usize>> = (0..grd.len())
        .map(|i| {
            grd.successors(i)
                .iter()
                .copied()
                .filter(|&j| !grd.is_assumed(i, j))
                .collect()
        })
        .collect();
    let ids = |c: Vec<usize>| c.into_iter().map(|i| rules.get(i).id.clone()).collect::<Vec<_>>();
    let mut assumed = None;
    for i in (0..grd.len()).filter(|&i| on(i)) {
        if let Some(c) = find_cycle_through(&proven, i, None) {
            return Verdict::Fails {
                witness: Witness::new(rules.get(i).id.clone(), ids(c)),
            };
        }
        if assumed.is_none() {
            if let Some(c) = find_cycle_through(grd.adjacency(), i, None) {
                assumed = Some(Witness::new(rules.get(i).id.clone(), ids(c)));
            }
        }
    }
    match assumed {
        Some(w) => Verdict::CannotCertify {
            reason: "dependency cycle uses budget-assumed edges".into(),
            witness: Some(w),
        },
        None => Verdict::Holds,
    }
}

/// Acyclicity of the dependency graph.
pub fn check_agrd(grd: &Grd, rules: &RuleSet) -> Verdict {
    rule_cycle_verdict(grd, rules, |_| true)
}

/// No dependency cycle goes through a rule with an existential variable.
pub fn check_r_acyclic(grd: &Grd, rules: &RuleSet) -> Verdict {
    rule_cycle_verdict(grd, rules, |i| !rules.get(i).existentials().is_empty())
}

/// Every strongly connected component of the dependency graph satisfies the
/// property on its own full position graph, except single rules without a loop.
pub fn check_by_components(rules: &RuleSet, grd: &Grd, property: Property, cap: usize, exec: Exec) -> Verdict {
    let mut unknown = None;
    for comp in scc(grd.adjacency()) {
        if comp.len() == 1 && !grd.has_edge(comp[0], comp[0]) {
            continue;
        }
        let sub = rules.subset(&comp);
        let empty = Grd::from_edges(sub.iter().map(|r| r.id.clone()).collect(), Vec::new());
        let pg = PositionGraph::build(&sub, Variant::F, &empty, cap, exec);
        match satisfies(&pg, &sub, property, exec) {
            Verdict::Holds => {}
            Verdict::Fails { witness } => {
                let relies_on_assumed = comp
                    .iter()
                    .any(|&i| comp.iter().any(|&j| grd.is_assumed(i, j)));
                if !relies_on_assumed {
                    return Verdict::Fails { witness };
                }
                unknown.get_or_insert(witness);
            }
            Verdict::CannotCertify { witness, .. } => {
                if let Some(w) = witness {
                    unknown.get_or_insert(w);
                }
            }
        }
    }
    match unknown {
        Some(w) => Verdict::CannotCertify {
            reason: "component is cyclic only through budget-assumed edges".into(),
            witness: Some(w),
        },
        None => Verdict::Holds,
    }
}

fn evaluate(rules: &RuleSet, graphs: &Graphs, class: Property, graph: GraphKind, opts: &Options) -> Verdict {
    match graph {
        GraphKind::UPlus => check_compatible_cycles(rules, &graphs.u, class, false, opts.budget, Exec::Sequential),
        g => satisfies(graphs.get(g), rules, class, Exec::Sequential),
    }
}

fn conclude(agrd: &Verdict, matrix: &[Cell], nme: &[Cell], negation: bool) -> Termination {
    let mut certified_by: Vec<String> = matrix
        .iter()
        .filter(|c| c.verdict.holds())
        .map(|c| format!("{}^{}", c.class, c.graph))
        .collect();
    if negation {
        certified_by.extend(
            nme.iter()
                .filter(|c| c.verdict.holds())
                .map(|c| format!("{}^NME", c.class)),
        );
    }
    if agrd.holds() {
        certified_by.insert(0, "aGRD".into());
    }
    let skolem = !certified_by.is_empty();
    let oblivious = agrd.holds();
    let summary = match (oblivious, skolem) {
        (true, _) => "every chase variant terminates on all fact sets (aGRD)".to_string(),
        (false, true) => format!(
            "skolem and restricted chase terminate on all fact sets ({})",
            certified_by[0]
        ),
        (false, false) => "termination not certified".to_string(),
    };
    Termination {
        oblivious,
        skolem,
        restricted: skolem,
        certified_by,
        summary,
    }
}

/// Fills the matrix column by column. Without `full`, a cell whose left
/// neighbour holds is inferred to hold.
pub fn classify(rules: &RuleSet, opts: &Options) -> AnalysisReport {
    let t0 = Instant::now();
    let graphs = Graphs::build(rules, opts.budget.unifier_cap, opts.exec);
    let millis_graphs = t0.elapsed().as_millis();
    let t1 = Instant::now();
    let agrd = check_agrd(&graphs.grd, rules);
    let r_acyclic = check_r_acyclic(&graphs.grd, rules);

    let mut columns: Vec<GraphKind> = opts.graphs.clone();
    columns.sort();
    columns.dedup();
    let mut matrix: Vec<Cell> = Vec::new();
    for &graph in &columns {
        let todo: Vec<(Property, bool)> = opts
            .classes
            .iter()
            .map(|&class| {
                let left_holds = matrix
                    .iter()
                    .filter(|c| c.class == class && c.graph < graph)
                    .any(|c| c.verdict.holds());
                (class, left_holds && !opts.full)
            })
            .collect();
        let verdicts = opts.exec.map(&todo, |&(class, inferred)| {
            if inferred {
                Verdict::Holds
            } else {
                evaluate(rules, &graphs, class, graph, opts)
            }
        });
        for ((class, inferred), verdict) in todo.into_iter().zip(verdicts) {
            matrix.push(Cell {
                class,
                graph,
                verdict,
                inferred,
            });
        }
    }
    matrix.sort_by_key(|c| (c.class, c.graph));

    let nme_cells = opts.exec.map(&opts.classes, |&class| {
        let plus = matrix
            .iter()
            .find(|c| c.class == class && c.graph == GraphKind::UPlus);
        match plus {
            Some(c) if c.verdict.holds() && !opts.full => Cell {
                class,
                graph: GraphKind::UPlus,
                verdict: Verdict::Holds,
                inferred: true,
            },
            Some(c) if !rules.has_negation() => Cell {
                inferred: c.inferred,
                ..c.clone()
            },
            _ => Cell {
                class,
                graph: GraphKind::UPlus,
                verdict: check_compatible_cycles(rules, &graphs.u, class, true, opts.budget, Exec::Sequential),
                inferred: false,
            },
        }
    });

    let refinable_edges = if opts.oracle {
        let edges: Vec<(usize, usize)> = graphs.grd.edges.iter().map(|e| (e.from, e.to)).collect();
        let verdicts = opts.exec.map(&edges, |&(i, j)| dependency_oracle(rules.get(i), rules.get(j)));
        edges
            .into_iter()
            .zip(verdicts)
            .filter(|(_, v)| *v != OracleVerdict::Yes)
            .map(|((i, j), oracle)| RefinableEdge {
                from: rules.get(i).id.clone(),
                to: rules.get(j).id.clone(),
                oracle,
            })
            .collect()
    } else {
        Vec::new()
    };

    let markings = if opts.dump_markings {
        let mut out = Vec::new();
        for &g in &columns {
            if g == GraphKind::UPlus {
                continue;
            }
            for &class in &opts.classes {
                let mut m = compute_marking(graphs.get(g), rules, class);
                m.graph = Some(g.name().to_string());
                out.push(m);
            }
        }
        out
    } else {
        Vec::new()
    };

    let termination = conclude(&agrd, &matrix, &nme_cells, rules.has_negation());
    let telemetry = Telemetry {
        rules: rules.len(),
        grd_edges: graphs.grd.edges.len(),
        assumed_grd_edges: graphs.grd.edges.iter().filter(|e| e.assumed).count(),
        position_nodes: graphs.f.len(),
        edges_f: graphs.f.edges.len(),
        edges_d: graphs.d.edges.len(),
        edges_u: graphs.u.edges.len(),
        assumed_u_edges: graphs.u.edges.iter().filter(|e| e.assumed).count(),
        millis_graphs,
        millis_matrix: t1.elapsed().as_millis(),
        cannot_certify_cells: matrix
            .iter()
            .chain(&nme_cells)
            .filter(|c| matches!(c.verdict, Verdict::CannotCertify { .. }))
            .count(),
    };
    AnalysisReport {
        schema: REPORT_SCHEMA.into(),
        agrd,
        r_acyclic,
        matrix,
        nme: nme_cells,
        termination,
        telemetry,
        refinable_edges,
        markings,
    }
}

fn mark(v: &Verdict) -> &'static str {
    match v {
        Verdict::Holds => "yes",
        Verdict::Fails { .. } => "no",
        Verdict::CannotCertify { .. } => "?",
    }
}

/// Fixed-width table, one row per class.
pub fn render_table(report: &AnalysisReport, witnesses: bool) -> String {
    let mut out = String::new();
    let mut columns: Vec<GraphKind> = report.matrix.iter().map(|c| c.graph).collect();
    columns.sort();
    columns.dedup();
    let mut classes: Vec<Property> = report.matrix.iter().map(|c| c.class).collect();
    classes.sort();
    classes.dedup();
    let _ = write!(out, "{:<6}", "class");
    for g in &columns {
        let _ = write!(out, "{:>6}", g.name());
    }
    let _ = writeln!(out, "{:>6}", "NME");
    for &class in &classes {
        let _ = write!(out, "{:<6}", class.name());
        for &g in &columns {
            let _ = write!(out, "{:>6}", report.cell(class, g).map_or("-", mark));
        }
        let _ = writeln!(out, "{:>6}", report.nme(class).map_or("-", mark));
    }
    let _ = writeln!(out, "aGRD: {}", mark(&report.agrd));
    let _ = writeln!(out, "R-acyclic: {}", mark(&report.r_acyclic));
    let _ = writeln!(out, "termination: {}", report.termination.summary);
    if witnesses {
        let all = std::iter::once(("aGRD".to_string(), &report.agrd))
            .chain(report.matrix.iter().map(|c| (format!("{}^{}", c.class, c.graph), &c.verdict)))
            .chain(report.nme.iter().map(|c| (format!("{}^NME", c.class), &c.verdict)));
        for (name, v) in all {
            if let Some(w) = v.witness() {
                let _ = writeln!(out, "{name} [{}]: seed {} cycle {}", v.label(), w.seed, w.cycle.join(" -> "));
                for u in &w.unifiers {
                    let _ = writeln!(out, "    {u}");
                }
            }
            if let Verdict::CannotCertify { reason, .. } = v {
                let _ = writeln!(out, "{name}: {reason}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_rules;

    fn full(text: &str) -> AnalysisReport {
        let rs = parse_rules(text).unwrap();
        classify(
            &rs,
            &Options {
                full: true,
                exec: Exec::Sequential,
                ..Options::default()
            },
        )
    }

    fn holds(r: &AnalysisReport, c: Property, g: GraphKind) -> bool {
        r.cell(c, g).unwrap().holds()
    }

    #[test]
    fn dependency_graph_beats_full_graph() {
        let r = full("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).");
        assert!(!holds(&r, Property::Wa, GraphKind::F));
        assert!(r.agrd.holds());
        assert!(holds(&r, Property::Wa, GraphKind::D));
        assert!(r.termination.oblivious);
    }

    #[test]
    fn unifiers_beat_dependencies() {
        let r = full("[R1] t(X,Y) -> p(Z,Y), q(Y). [R2] p(U,V), q(U) -> t(V,W).");
        assert!(!r.agrd.holds());
        assert!(!holds(&r, Property::Wa, GraphKind::F));
        assert!(!holds(&r, Property::Wa, GraphKind::D));
        assert!(holds(&r, Property::Wa, GraphKind::U));
        assert!(r.termination.skolem && !r.termination.oblivious);
    }

    #[test]
    fn swap_rule_is_wa_but_not_agrd() {
        let r = full("p(X,Y) -> p(Y,X).");
        assert!(holds(&r, Property::Wa, GraphKind::F));
        assert!(matches!(r.agrd, Verdict::Fails { .. }));
        assert!(r.r_acyclic.holds());
    }

    #[test]
    fn negation_refinement() {
        let text = "[R1] q(X1), not p(X1) -> r(X1,Y1). [R2] r(X2,Y2) -> s(X2,Y2). [R3] s(X3,Y3) -> p(X3), q(Y3).";
        let r = full(text);
        assert!(!holds(&r, Property::Swa, GraphKind::UPlus));
        assert!(r.nme(Property::Wa).unwrap().holds());
        assert!(r.r_acyclic.fails());
        assert!(r.termination.skolem);
        let r = full("[R1] q(X1) -> r(X1,Y1). [R2] r(X2,Y2) -> s(X2,Y2). [R3] s(X3,Y3) -> p(X3), q(Y3).");
        assert!(r.nme(Property::Swa).unwrap().fails());
        assert!(!r.termination.skolem);
    }

    #[test]
    fn lazy_matrix_infers_right_columns() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).").unwrap();
        let r = classify(&rs, &Options::default());
        let c = r.matrix.iter().find(|c| c.class == Property::Wa && c.graph == GraphKind::U).unwrap();
        assert!(c.inferred && c.verdict.holds());
        assert_eq!(r.schema, "report-v1");
    }

    #[test]
    fn components_agree_with_dependency_graph() {
        for text in [
            "[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).",
            "[R1] t(X,Y) -> p(Z,Y), q(Y). [R2] p(U,V), q(U) -> t(V,W).",
            "p(X,Y) -> p(Y,Z).",
        ] {
            let rs = parse_rules(text).unwrap();
            let g = Graphs::build(&rs, 4096, Exec::Sequential);
            for p in Property::ALL {
                assert_eq!(
                    check_by_components(&rs, &g.grd, p, 4096, Exec::Sequential).holds(),
                    satisfies(&g.d, &rs, p, Exec::Sequential).holds(),
                    "{text} {p}"
                );
            }
        }
    }
}
