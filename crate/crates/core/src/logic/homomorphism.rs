use std::ops::ControlFlow;

use super::{Atom, AtomSet, Substitution, Term};

/// Restricts which target atoms a pattern atom may be matched to.
/// Arguments are the pattern atom index and the target atom index.
pub type AtomRange<'a> = &'a dyn Fn(usize, usize) -> bool;

fn match_term(pattern: &Term, target: &Term, sub: &mut Substitution, bound: &mut Vec<String>) -> bool {
    match pattern {
        Term::Var { name } => match sub.get(name) {
            Some(t) => t == target,
            None => {
                sub.insert(name.clone(), target.clone());
                bound.push(name.clone());
                true
            }
        },
        Term::Const { .. } => pattern == target,
        Term::Func { symbol, args } => match target {
            Term::Func {
                symbol: s2,
                args: a2,
            } if s2 == symbol && a2.len() == args.len() => args
                .iter()
                .zip(a2)
                .all(|(p, t)| match_term(p, t, sub, bound)),
            _ => false,
        },
    }
}

fn match_atom(pattern: &Atom, target: &Atom, sub: &mut Substitution) -> Option<Vec<String>> {
    if pattern.predicate != target.predicate || pattern.args.len() != target.args.len() {
        return None;
    }
    let mut bound = Vec::new();
    for (p, t) in pattern.args.iter().zip(&target.args) {
        if !match_term(p, t, sub, &mut bound) {
            for v in bound {
                sub.remove(&v);
            }
            return None;
        }
    }
    Some(bound)
}

struct Search<'a, F> {
    pattern: &'a [Atom],
    target: &'a AtomSet,
    allow: Option<AtomRange<'a>>,
    used: Vec<Option<usize>>,
    visit: F,
}

impl<F: FnMut(&Substitution, &[Option<usize>]) -> ControlFlow<()>> Search<'_, F> {
    fn run(&mut self, sub: &mut Substitution, remaining: usize) -> ControlFlow<()> {
        if remaining == 0 {
            return (self.visit)(sub, &self.used);
        }
        let next = self.pattern.len() - remaining;
        let atom = &self.pattern[next];
        for &ti in self.target.with_predicate(&atom.predicate) {
            if let Some(allow) = self.allow {
                if !allow(next, ti) {
                    continue;
                }
            }
            if let Some(bound) = match_atom(atom, self.target.get(ti), sub) {
                self.used[next] = Some(ti);
                let flow = self.run(sub, remaining - 1);
                self.used[next] = None;
                for v in bound {
                    sub.remove(&v);
                }
                flow?;
            }
        }
        ControlFlow::Continue(())
    }
}

/// Enumerates every extension of `init` that maps all of `pattern` into
/// `target`, atoms in pattern order and candidates in insertion order. Variables of the target are treated as rigid terms. The visitor
/// also receives the target index chosen for each pattern atom.
pub fn for_each_homomorphism<F>(
    pattern: &[Atom],
    target: &AtomSet,
    init: &Substitution,
    allow: Option<AtomRange<'_>>,
    visit: F,
) -> ControlFlow<()>
where
    F: FnMut(&Substitution, &[Option<usize>]) -> ControlFlow<()>,
{
    let mut search = Search {
        pattern,
        target,
        allow,
        used: vec![None; pattern.len()],
        visit,
    };
    let mut sub = init.clone();
    search.run(&mut sub, pattern.len())
}

pub fn homomorphisms(pattern: &[Atom], target: &AtomSet, init: &Substitution) -> Vec<Substitution> {
    let mut out = Vec::new();
    let _ = for_each_homomorphism(pattern, target, init, None, |s, _| {
        out.push(s.clone());
        ControlFlow::Continue(())
    });
    out
}

/// Whether some extension of `init` maps `pattern` into `target`.
pub fn exists_homomorphism(pattern: &[Atom], target: &AtomSet, init: &Substitution) -> bool {
    for_each_homomorphism(pattern, target, init, None, |_, _| ControlFlow::Break(())).is_break()
}

/// Whether `sub` itself maps every pattern atom into `target`.
pub fn is_homomorphism(pattern: &[Atom], target: &AtomSet, sub: &Substitution) -> bool {
    pattern.iter().all(|a| target.contains(&sub.apply_atom(a)))
}
