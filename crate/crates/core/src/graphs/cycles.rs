//! Strongly connected components and elementary cycles over adjacency lists.

use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::unify::BudgetExceeded;

/// Strongly connected components, each sorted, in reverse topological order.
pub fn scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(adj.len(), 0);
    let ids: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            g.add_edge(ids[v], ids[w], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

fn allowed(mask: Option<&[bool]>, v: usize) -> bool {
    mask.is_none_or(|m| m[v])
}

/// A shortest cycle through `start` inside the nodes allowed by `mask`.
pub fn find_cycle_through(adj: &[Vec<usize>], start: usize, mask: Option<&[bool]>) -> Option<Vec<usize>> {
    if !allowed(mask, start) {
        return None;
    }
    let mut parent = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([start]);
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !allowed(mask, w) {
                continue;
            }
            if w == start {
                let mut cycle = vec![v];
                let mut cur = v;
                while cur != start {
                    cur = parent[cur];
                    cycle.push(cur);
                }
                cycle.pop();
                cycle.push(start);
                cycle.reverse();
                return Some(cycle);
            }
            if !seen[w] {
                seen[w] = true;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

pub fn has_cycle_through(adj: &[Vec<usize>], start: usize, mask: Option<&[bool]>) -> bool {
    find_cycle_through(adj, start, mask).is_some()
}

/// Elementary cycles through `start` inside `mask`, shortest first, each
/// listed from `start`. Fails once the search has visited `budget` nodes.
pub fn elementary_cycles_through(
    adj: &[Vec<usize>],
    start: usize,
    mask: Option<&[bool]>,
    budget: usize,
) -> Result<Vec<Vec<usize>>, BudgetExceeded> {
    let mut out = Vec::new();
    if !allowed(mask, start) {
        return Ok(out);
    }
    // restrict to the component of start so the deepening stops early
    let reachable_back: Vec<bool> = {
        let mut rev = vec![Vec::new(); adj.len()];
        for (v, s) in adj.iter().enumerate() {
            for &w in s {
                rev[w].push(v);
            }
        }
        let mut seen = vec![false; adj.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if !seen[w] && allowed(mask, w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let limit = reachable_back.iter().filter(|&&b| b).count();
    let mut steps = 0usize;
    for len in 1..=limit {
        let mut path = vec![start];
        let mut on_path = vec![false; adj.len()];
        on_path[start] = true;
        extend(adj, mask, &reachable_back, len, &mut path, &mut on_path, &mut out, &mut steps, budget)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    adj: &[Vec<usize>],
    mask: Option<&[bool]>,
    back: &[bool],
    len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
    steps: &mut usize,
    budget: usize,
) -> Result<(), BudgetExceeded> {
    *steps += 1;
    if *steps > budget {
        return Err(BudgetExceeded {
            needed: *steps,
            cap: budget,
        });
    }
    let v = *path.last().unwrap();
    if path.len() == len {
        if adj[v].contains(&path[0]) {
            out.push(path.clone());
        }
        return Ok(());
    }
    for &w in &adj[v] {
        if on_path[w] || !back[w] || !allowed(mask, w) {
            continue;
        }
        on_path[w] = true;
        path.push(w);
        extend(adj, mask, back, len, path, on_path, out, steps, budget)?;
        path.pop();
        on_path[w] = false;
    }
    Ok(())
}

/// All elementary cycles of the graph, each reported once from its smallest node.
pub fn elementary_cycles(adj: &[Vec<usize>], budget: usize) -> Result<Vec<Vec<usize>>, BudgetExceeded> {
    let mut out = Vec::new();
    let mut used = 0;
    for v in 0..adj.len() {
        let mask: Vec<bool> = (0..adj.len()).map(|w| w >= v).collect();
        let cycles = elementary_cycles_through(adj, v, Some(&mask), budget.saturating_sub(used))?;
        used += cycles.len();
        out.extend(cycles);
    }
    out.sort_by_key(|c| c.len());
    Ok(out)
}
