//! Breadth-first forward chaining: oblivious, skolem and restricted chase.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{
    exists_homomorphism, for_each_homomorphism, instantiate_head, skolemize, Atom, AtomSet, FreshNames, Rule,
    RuleSet, Substitution, Term,
};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChaseVariant {
    Oblivious,
    Skolem,
    Restricted,
}

impl FromStr for ChaseVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oblivious" => Ok(ChaseVariant::Oblivious),
            "skolem" => Ok(ChaseVariant::Skolem),
            "restricted" => Ok(ChaseVariant::Restricted),
            _ => Err(format!("unknown chase variant {s}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegationMode {
    Reject,
    /// Apply a trigger only when no negative atom is present at that moment.
    Check,
}

impl FromStr for NegationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reject" => Ok(NegationMode::Reject),
            "check" => Ok(NegationMode::Check),
            _ => Err(format!("unknown negation mode {s}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChaseConfig {
    pub variant: ChaseVariant,
    /// Rule applications before giving up.
    pub max_steps: usize,
    pub max_atoms: usize,
    pub detect_cyclic_terms: bool,
    pub negation: NegationMode,
    pub exec: Exec,
}

impl Default for ChaseConfig {
    fn default() -> Self {
        ChaseConfig {
            variant: ChaseVariant::Skolem,
            max_steps: 100_000,
            max_atoms: 100_000,
            detect_cyclic_terms: false,
            negation: NegationMode::Check,
            exec: Exec::default(),
        }
    }
}

impl ChaseConfig {
    pub fn new(variant: ChaseVariant) -> Self {
        ChaseConfig {
            variant,
            ..ChaseConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChaseError {
    #[error("rule {rule} has a negative body and negation mode is reject")]
    NegationRejected { rule: String },
    #[error("chase budgets must be positive")]
    ZeroBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltStatus {
    Fixpoint,
    BudgetExhausted,
    CyclicTermFound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub round: usize,
    pub rule: String,
    pub homomorphism: Substitution,
    /// Head atoms that were not already present.
    pub produced: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub initial: Vec<Atom>,
    pub steps: Vec<Step>,
    #[serde(rename = "final")]
    pub atoms: Vec<Atom>,
    pub status: HaltStatus,
    pub rounds: usize,
    pub productive_rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_term: Option<Term>,
    /// Triggers retracted because their negative atoms were derived later.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retracted: Vec<String>,
}

impl Derivation {
    pub fn atom_set(&self) -> AtomSet {
        self.atoms.iter().cloned().collect()
    }

    pub fn summary(&self) -> String {
        let rounds = match self.productive_rounds {
            1 => "1 productive round".to_string(),
            n => format!("{n} productive rounds"),
        };
        let atoms = match self.atoms.len() {
            1 => "1 atom".to_string(),
            n => format!("{n} atoms"),
        };
        match self.status {
            HaltStatus::Fixpoint => format!("fixpoint after {rounds}, {atoms}"),
            HaltStatus::BudgetExhausted => format!("budget exhausted after {rounds}, {atoms}"),
            HaltStatus::CyclicTermFound => {
                let t = self.cyclic_term.as_ref().map(ToString::to_string).unwrap_or_default();
                format!("cyclic term {t} after {rounds}, {atoms}")
            }
        }
    }
}

fn collect_names(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const { name } | Term::Var { name } => {
            out.insert(name.clone());
        }
        Term::Func { args, .. } => args.iter().for_each(|a| collect_names(a, out)),
    }
}

fn names_of<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in atoms {
        a.args.iter().for_each(|t| collect_names(t, &mut out));
    }
    out
}

/// Replaces the variables of an existentially closed fact conjunction by
/// fresh constants.
pub fn freeze_facts(facts: &[Atom], fresh: &mut FreshNames) -> Vec<Atom> {
    let mut sub = Substitution::new();
    for a in facts {
        for v in a.vars() {
            if !sub.contains(v) {
                sub.insert(v.to_string(), fresh.constant());
            }
        }
    }
    facts.iter().map(|a| sub.apply_atom(a)).collect()
}

/// A functional term with a proper subterm using the same function symbol.
pub fn detect_cyclic_term<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Option<Term> {
    fn has_symbol(t: &Term, symbol: &str) -> bool {
        match t {
            Term::Func { symbol: s, args } => s == symbol || args.iter().any(|a| has_symbol(a, symbol)),
            _ => false,
        }
    }
    fn search(t: &Term) -> Option<Term> {
        let Term::Func { symbol, args } = t else { return None };
        if args.iter().any(|a| has_symbol(a, symbol)) {
            return Some(t.clone());
        }
        args.iter().find_map(search)
    }
    atoms.into_iter().flat_map(|a| a.args.iter()).find_map(search)
}

type Trigger = (usize, Substitution);
type TriggerKey = (usize, Vec<Term>);

enum Outcome {
    Halted(HaltStatus, Option<Term>),
    /// A derived atom contradicts the negative assumption of an earlier step.
    Refuted(TriggerKey, String),
}

struct Engine<'a> {
    rules: &'a RuleSet,
    cfg: ChaseConfig,
    facts: AtomSet,
    fresh: FreshNames,
    applied: HashSet<TriggerKey>,
    banned: &'a HashSet<TriggerKey>,
    steps: Vec<Step>,
    /// negative atom -> steps that assumed it absent
    assumptions: HashMap<Atom, Vec<usize>>,
    keys: Vec<TriggerKey>,
    rounds: usize,
    productive: usize,
    /// Applications made by earlier, retracted runs.
    spent: usize,
}

impl Engine<'_> {
    /// Triggers over the first `upto` atoms using at least one atom at index `from` or later.
    fn triggers(&self, from: usize, upto: usize) -> Vec<Trigger> {
        let per_rule = self.cfg.exec.map_range(self.rules.len(), |r| {
            let rule = self.rules.get(r);
            let mut out: Vec<Substitution> = Vec::new();
            let mut seen: HashSet<Substitution> = HashSet::new();
            for pivot in 0..rule.body.len() {
                // semi-naive split: atoms before the pivot see old facts only
                let allow = |p: usize, t: usize| {
                    t < upto
                        && match p.cmp(&pivot) {
                            Ordering::Less => t < from,
                            Ordering::Equal => t >= from,
                            Ordering::Greater => true,
                        }
                };
                let _ = for_each_homomorphism(&rule.body, &self.facts, &Substitution::new(), Some(&allow), |s, _| {
                    if seen.insert(s.clone()) {
                        out.push(s.clone());
                    }
                    ControlFlow::Continue(())
                });
                if from == 0 {
                    break;
                }
            }
            out
        });
        per_rule
            .into_iter()
            .enumerate()
            .flat_map(|(r, subs)| subs.into_iter().map(move |s| (r, s)))
            .collect()
    }

    fn key(rule: &Rule, r: usize, pi: &Substitution) -> TriggerKey {
        let image = rule
            .vars()
            .iter()
            .filter(|v| rule.body.iter().any(|a| a.contains_var(v)))
            .map(|v| pi.apply_term(&Term::var(v.clone())))
            .collect();
        (r, image)
    }

    fn active(&self, rule: &Rule, pi: &Substitution) -> bool {
        if self.cfg.variant != ChaseVariant::Restricted {
            return true;
        }
        let frontier = rule.frontier();
        !exists_homomorphism(&rule.head, &self.facts, &pi.restrict(frontier.iter().map(String::as_str)))
    }

    fn run(&mut self) -> Outcome {
        let mut from = 0;
        loop {
            let upto = self.facts.len();
            let triggers = self.triggers(from, upto);
            self.rounds += 1;
            let mut added = false;
            for (r, pi) in triggers {
                let rule = self.rules.get(r);
                let key = Self::key(rule, r, &pi);
                if self.banned.contains(&key) || !self.applied.insert(key.clone()) {
                    continue;
                }
                let negative = pi.apply_atoms(&rule.negative);
                if negative.iter().any(|a| self.facts.contains(a)) || !self.active(rule, &pi) {
                    continue;
                }
                if self.spent + self.steps.len() >= self.cfg.max_steps {
                    self.productive += usize::from(added);
                    return Outcome::Halted(HaltStatus::BudgetExhausted, None);
                }
                let head = instantiate_head(rule, &pi, &mut self.fresh);
                let produced: Vec<Atom> = head.into_iter().filter(|a| self.facts.insert(a.clone())).collect();
                let step = self.steps.len();
                for a in negative {
                    self.assumptions.entry(a).or_default().push(step);
                }
                self.keys.push(key);
                added |= !produced.is_empty();
                let refuted = produced
                    .iter()
                    .filter_map(|a| self.assumptions.get(a).and_then(|s| s.first()))
                    .min()
                    .copied();
                let cyclic = if self.cfg.detect_cyclic_terms {
                    detect_cyclic_term(&produced)
                } else {
                    None
                };
                self.steps.push(Step {
                    round: self.rounds,
                    rule: rule.id.clone(),
                    homomorphism: pi,
                    produced,
                });
                if let Some(s) = refuted {
                    let label = format!("{} {}", self.steps[s].rule, self.steps[s].homomorphism);
                    return Outcome::Refuted(self.keys[s].clone(), label);
                }
                if cyclic.is_some() {
                    self.productive += 1;
                    return Outcome::Halted(HaltStatus::CyclicTermFound, cyclic);
                }
                if self.facts.len() > self.cfg.max_atoms {
                    self.productive += 1;
                    return Outcome::Halted(HaltStatus::BudgetExhausted, None);
                }
            }
            if !added {
                return Outcome::Halted(HaltStatus::Fixpoint, None);
            }
            self.productive += 1;
            from = upto;
        }
    }
}

/// Runs the configured chase from `facts`. Variables in `facts` are frozen
/// into fresh constants first; the skolem variant skolemizes the rules.
///
/// With negation, a step whose negative atoms are derived later is retracted:
/// its trigger is banned and the derivation restarts from the facts.
pub fn run_chase(facts: &[Atom], rules: &RuleSet, cfg: ChaseConfig) -> Result<Derivation, ChaseError> {
    if cfg.max_steps == 0 || cfg.max_atoms == 0 {
        return Err(ChaseError::ZeroBudget);
    }
    if cfg.negation == NegationMode::Reject {
        if let Some(r) = rules.iter().find(|r| r.has_negation()) {
            return Err(ChaseError::NegationRejected { rule: r.id.clone() });
        }
    }
    let skolemized;
    let rules = if cfg.variant == ChaseVariant::Skolem {
        skolemized = skolemize(rules);
        &skolemized
    } else {
        rules
    };
    let mut taken = names_of(facts);
    taken.extend(rules.iter().flat_map(|r| names_of(r.body.iter().chain(&r.negative).chain(&r.head))));
    let mut fresh = FreshNames::avoiding(taken);
    let initial = freeze_facts(facts, &mut fresh);
    let mut banned = HashSet::new();
    let mut retracted = Vec::new();
    let mut spent = 0;
    loop {
        let mut engine = Engine {
            rules,
            cfg,
            facts: initial.iter().cloned().collect(),
            fresh: fresh.clone(),
            applied: HashSet::new(),
            banned: &banned,
            steps: Vec::new(),
            assumptions: HashMap::new(),
            keys: Vec::new(),
            rounds: 0,
            productive: 0,
            spent,
        };
        match engine.run() {
            Outcome::Refuted(key, label) => {
                spent += engine.steps.len();
                retracted.push(label);
                banned.insert(key);
            }
            Outcome::Halted(status, cyclic_term) => {
                return Ok(Derivation {
                    initial,
                    steps: engine.steps,
                    atoms: engine.facts.to_vec(),
                    status,
                    rounds: engine.rounds,
                    productive_rounds: engine.productive,
                    cyclic_term,
                    retracted,
                });
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Unknown => "unknown",
        })
    }
}

/// Boolean conjunctive query answering by saturation.
pub fn entails_bcq(
    facts: &[Atom],
    rules: &RuleSet,
    query: &[Atom],
    cfg: ChaseConfig,
) -> Result<(Answer, Derivation), ChaseError> {
    let d = run_chase(facts, rules, cfg)?;
    let found = exists_homomorphism(query, &d.atom_set(), &Substitution::new());
    let answer = match (found, d.status) {
        (true, _) => Answer::Yes,
        (false, HaltStatus::Fixpoint) => Answer::No,
        (false, _) => Answer::Unknown,
    };
    Ok((answer, d))
}
