use super::{compose, Composed, Unifier};
use crate::graphs::{Position, PositionGraph};
use crate::logic::{Rule, Side};

/// Whether `mu`, a unifier of the body of `body` (rule `body_index`, possibly
/// renamed) with the head of `head`, is compatible: every body position whose
/// variable is sent to an existential of the head must be reachable in `pg`
/// from a position of that existential without crossing another existential
/// position.
pub fn is_compatible(head: &Composed, mu: &Unifier, body: &Rule, body_index: usize, pg: &PositionGraph) -> bool {
    let existentials = head.rule.existential_set();
    for (a, atom) in body.body.iter().enumerate() {
        for (i, t) in atom.args.iter().enumerate() {
            if !t.is_var() {
                continue;
            }
            let image = mu.subst.apply_term(t);
            let Some(z) = image.as_var() else { continue };
            if !existentials.contains(z) {
                continue;
            }
            let starts: Vec<usize> = head
                .head_positions_of(z)
                .into_iter()
                .filter_map(|(r, k, arg)| {
                    pg.node(Position {
                        rule: r,
                        side: Side::Head,
                        atom: k,
                        arg,
                    })
                })
                .collect();
            let Some(target) = pg.node(Position {
                rule: body_index,
                side: Side::Body,
                atom: a,
                arg: i + 1,
            }) else {
                return false;
            };
            if !pg.reaches_avoiding_existentials(&starts, target) {
                return false;
            }
        }
    }
    true
}

/// Checks `R1 μ1 R2 ... μk Rk+1` step by step, folding the prefix into a
/// unified rule after each compatible step.
pub fn is_compatible_sequence(first: Composed, steps: &[(Unifier, Rule, usize)], pg: &PositionGraph) -> bool {
    let mut acc = first;
    for (mu, rule, idx) in steps {
        if !is_compatible(&acc, mu, rule, *idx, pg) {
            return false;
        }
        acc = compose(&acc, mu, rule, *idx);
    }
    true
}
