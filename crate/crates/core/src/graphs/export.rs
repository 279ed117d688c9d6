//! DOT and JSON renderings of the graphs.

use std::fmt::Write as _;

use serde::Serialize;

use super::{EdgeKind, Grd, PositionGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Existential positions are double circles; assumed edges are dashed.
pub fn position_graph_dot(g: &PositionGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&format!("PG_{}", g.variant)));
    for n in &g.nodes {
        let shape = if n.existential { "doublecircle" } else { "circle" };
        let label = format!("{}[{}]\\n{}", n.predicate, n.position.arg, n.name);
        let _ = writeln!(out, "  {} [shape={shape}, label={}];", quote(&n.name), quote(&label));
    }
    for e in &g.edges {
        let mut attrs = Vec::new();
        if e.kind == EdgeKind::Transition {
            attrs.push("color=blue");
        }
        if e.assumed {
            attrs.push("style=dashed");
        }
        let _ = write!(out, "  {} -> {}", quote(&g.nodes[e.from].name), quote(&g.nodes[e.to].name));
        if !attrs.is_empty() {
            let _ = write!(out, " [{}]", attrs.join(", "));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

pub fn grd_dot(g: &Grd) -> String {
    let mut out = String::from("digraph GRD {\n");
    for id in &g.rule_ids {
        let _ = writeln!(out, "  {};", quote(id));
    }
    for e in &g.edges {
        let _ = write!(out, "  {} -> {}", quote(&g.rule_ids[e.from]), quote(&g.rule_ids[e.to]));
        if e.assumed {
            out.push_str(" [style=dashed]");
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

pub fn position_graph_json(g: &PositionGraph) -> String {
    serde_json::to_string_pretty(g).expect("graphs serialize")
}

#[derive(Serialize)]
struct GrdJson<'a> {
    rules: &'a [String],
    edges: Vec<(&'a str, &'a str, bool)>,
}

pub fn grd_json(g: &Grd) -> String {
    let j = GrdJson {
        rules: &g.rule_ids,
        edges: g
            .edges
            .iter()
            .map(|e| (g.rule_ids[e.from].as_str(), g.rule_ids[e.to].as_str(), e.assumed))
            .collect(),
    };
    serde_json::to_string_pretty(&j).expect("graphs serialize")
}

#[cfg(test)]
mod tests {
    use super::super::Variant;
    use super::*;
    use crate::logic::RuleSet;
    use crate::par::Exec;
    use crate::parser::parse_rules;

    #[test]
    fn empty_graph_is_valid_dot() {
        let rs = RuleSet::empty();
        let grd = Grd::build(&rs, 16, Exec::Sequential);
        let pg = PositionGraph::build(&rs, Variant::F, &grd, 16, Exec::Sequential);
        assert_eq!(position_graph_dot(&pg), "digraph \"PG_F\" {\n}\n");
        assert_eq!(grd_dot(&grd), "digraph GRD {\n}\n");
    }

    #[test]
    fn dependency_variant_drops_edges() {
        let rs = parse_rules("[R1] h(X) -> p(X,Y). [R2] p(U,V), q(V) -> h(V).").unwrap();
        let grd = Grd::build(&rs, 4096, Exec::Sequential);
        let f = position_graph_dot(&PositionGraph::build(&rs, Variant::F, &grd, 4096, Exec::Sequential));
        let d = position_graph_dot(&PositionGraph::build(&rs, Variant::D, &grd, 4096, Exec::Sequential));
        assert!(f.contains("\"R1.h0.2\" -> \"R2.b0.2\""));
        assert!(!d.contains("\"R1.h0.2\" -> \"R2.b0.2\""));
        assert!(d.contains("\"R2.h0.1\" -> \"R1.b0.1\""));
        assert!(f.contains("doublecircle"));
        assert!(grd_json(&grd).contains("\"R2\""));
    }
}
