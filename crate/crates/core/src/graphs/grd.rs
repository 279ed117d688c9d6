use serde::{Deserialize, Serialize};

use crate::logic::RuleSet;
use crate::par::Exec;
use crate::unify::{depends_on, Dependency, Unifier};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrdEdge {
    pub from: usize,
    pub to: usize,
    /// Piece-unifier witnessing the dependency, absent when assumed.
    #[serde(skip)]
    pub witness: Option<Unifier>,
    /// Kept without proof because unifier enumeration ran out of budget.
    #[serde(default)]
    pub assumed: bool,
}

/// Graph of rule dependencies: an edge `i -> j` when rule `j` depends on rule `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grd {
    pub rule_ids: Vec<String>,
    pub edges: Vec<GrdEdge>,
    succ: Vec<Vec<usize>>,
    reach: Vec<Vec<bool>>,
    /// Reachability through edges that are not assumed.
    proven: Vec<Vec<bool>>,
}

fn closure(succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = succ.len();
    (0..n)
        .map(|i| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = succ[i].clone();
            while let Some(v) = stack.pop() {
                if !seen[v] {
                    seen[v] = true;
                    stack.extend(&succ[v]);
                }
            }
            seen
        })
        .collect()
}

impl Grd {
    pub fn build(rules: &RuleSet, cap: usize, exec: Exec) -> Grd {
        let n = rules.len();
        let cells = exec.map_range(n * n, |k| {
            let (i, j) = (k / n, k % n);
            match depends_on(rules.get(i), rules.get(j), cap) {
                Ok(Dependency::Yes { witness }) => Some(GrdEdge {
                    from: i,
                    to: j,
                    witness: Some(witness),
                    assumed: false,
                }),
                Ok(Dependency::No) => None,
                Err(_) => Some(GrdEdge {
                    from: i,
                    to: j,
                    witness: None,
                    assumed: true,
                }),
            }
        });
        Grd::from_edges(
            rules.iter().map(|r| r.id.clone()).collect(),
            cells.into_iter().flatten().collect(),
        )
    }

    pub fn from_edges(rule_ids: Vec<String>, edges: Vec<GrdEdge>) -> Grd {
        let n = rule_ids.len();
        let mut succ = vec![Vec::new(); n];
        let mut certain = vec![Vec::new(); n];
        for e in &edges {
            succ[e.from].push(e.to);
            if !e.assumed {
                certain[e.from].push(e.to);
            }
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let reach = closure(&succ);
        let proven = closure(&certain);
        Grd {
            rule_ids,
            edges,
            succ,
            reach,
            proven,
        }
    }

    pub fn len(&self) -> usize {
        self.rule_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule_ids.is_empty()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    /// A non-empty path from `i` to `j` exists.
    pub fn reaches(&self, i: usize, j: usize) -> bool {
        self.reach[i][j]
    }

    pub fn predecessors(&self, j: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn is_assumed(&self, i: usize, j: usize) -> bool {
        self.edges.iter().any(|e| e.from == i && e.to == j && e.assumed)
    }

    /// Every path from `i` to `j` uses an assumed edge.
    pub fn reach_is_assumed(&self, i: usize, j: usize) -> bool {
        self.reach[i][j] && !self.proven[i][j]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.succ
    }

    /// No cycle at all, self-loops included.
    pub fn is_acyclic(&self) -> bool {
        (0..self.len()).all(|i| !self.reach[i][i])
    }

    pub fn on_cycle(&self, i: usize) -> bool {
        self.reach[i][i]
    }
}
