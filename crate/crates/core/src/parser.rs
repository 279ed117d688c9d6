//! Text format for rule bases (`.erb`): rules, `!` facts, `?` queries and
//! `%` comments. [`serialize`] is the canonical writer.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, Rule, RuleError, RuleSet, Term, FRONTIER_PREDICATE};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Document {
    pub rules: RuleSet,
    /// One existentially closed conjunction; variables are shared across lines.
    pub facts: Vec<Atom>,
    pub queries: Vec<Vec<Atom>>,
    /// Line of each rule in the source, parallel to `rules`.
    #[serde(skip)]
    pub rule_lines: Vec<usize>,
}

/// Equality ignores source positions.
impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.facts == other.facts && self.queries == other.queries
    }
}

impl Eq for Document {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("predicate {predicate} used with arity {first} and {second}")]
    ArityConflict {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("variable {0} of a negative atom does not occur in the positive body")]
    NegativeVariable(String),
    #[error("predicate `{FRONTIER_PREDICATE}` is reserved")]
    ReservedPredicate,
    #[error("duplicate rule label {0}")]
    DuplicateLabel(String),
    #[error("input is not valid UTF-8")]
    Encoding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Arrow,
    Bang,
    Question,
    Eof,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let tok = match c {
            c if c.is_whitespace() => {
                bump(&mut chars);
                continue;
            }
            '%' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump(&mut chars);
                }
                continue;
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while chars
                    .peek()
                    .is_some_and(|&c| c.is_ascii_alphanumeric() || c == '_')
                {
                    s.push(bump(&mut chars));
                }
                Tok::Ident(s)
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    Tok::Arrow
                } else {
                    return Err(syntax(pos, "expected `->`"));
                }
            }
            _ => {
                bump(&mut chars);
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '!' => Tok::Bang,
                    '?' => Tok::Question,
                    other => return Err(syntax(pos, format!("unexpected character {other:?}"))),
                }
            }
        };
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column }));
    Ok(out)
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn at(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind,
    }
}

fn is_variable(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') && !name.starts_with("__")
}

struct RawRule {
    label: Option<String>,
    body: Vec<Atom>,
    negative: Vec<(Atom, Pos)>,
    head: Vec<Atom>,
    pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    arities: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.i + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let (t, pos) = self.next();
        if t == tok {
            Ok(())
        } else {
            Err(syntax(pos, format!("expected {what}, found {}", describe(&t))))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (t, pos) = self.next();
        let Tok::Ident(name) = t else {
            return Err(syntax(pos, format!("expected a term, found {}", describe(&t))));
        };
        if *self.peek() == Tok::LParen {
            if is_variable(&name) {
                return Err(syntax(pos, "function symbols must start lowercase"));
            }
            self.next();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                args.push(self.term()?);
                while *self.peek() == Tok::Comma {
                    self.next();
                    args.push(self.term()?);
                }
            }
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Term::func(name, args));
        }
        Ok(if is_variable(&name) {
            Term::var(name)
        } else {
            Term::constant(name)
        })
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let (t, pos) = self.next();
        let Tok::Ident(name) = t else {
            return Err(syntax(pos, format!("expected an atom, found {}", describe(&t))));
        };
        if is_variable(&name) {
            return Err(syntax(pos, "predicates must start lowercase"));
        }
        if name == FRONTIER_PREDICATE {
            return Err(at(pos, ParseErrorKind::ReservedPredicate));
        }
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        match self.arities.get(&name) {
            Some(&n) if n != args.len() => {
                return Err(at(
                    pos,
                    ParseErrorKind::ArityConflict {
                        predicate: name,
                        first: n,
                        second: args.len(),
                    },
                ))
            }
            Some(_) => {}
            None => {
                self.arities.insert(name.clone(), args.len());
            }
        }
        Ok(Atom::new(name, args))
    }

    fn atoms(&mut self) -> Result<Vec<Atom>, ParseError> {
        let mut out = vec![self.atom()?];
        while *self.peek() == Tok::Comma {
            self.next();
            out.push(self.atom()?);
        }
        Ok(out)
    }

    fn rule(&mut self) -> Result<RawRule, ParseError> {
        let pos = self.pos();
        let mut label = None;
        if *self.peek() == Tok::LBracket {
            self.next();
            let (t, p) = self.next();
            let Tok::Ident(name) = t else {
                return Err(syntax(p, "expected a rule label"));
            };
            label = Some(name);
            self.expect(Tok::RBracket, "`]`")?;
        }
        let (mut body, mut negative) = (Vec::new(), Vec::new());
        if *self.peek() != Tok::Arrow {
            loop {
                let negated = matches!(self.peek(), Tok::Ident(s) if s == "not")
                    && matches!(self.peek2(), Tok::Ident(_));
                if negated {
                    self.next();
                    let p = self.pos();
                    negative.push((self.atom()?, p));
                } else {
                    body.push(self.atom()?);
                }
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.next();
            }
        }
        self.expect(Tok::Arrow, "`->`")?;
        let head = self.atoms()?;
        self.expect(Tok::Dot, "`.`")?;
        Ok(RawRule {
            label,
            body,
            negative,
            head,
            pos,
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Question => "`?`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse(text: &str) -> Result<Document, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        i: 0,
        arities: HashMap::new(),
    };
    let mut raw = Vec::new();
    let mut doc = Document::default();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Bang => {
                p.next();
                doc.facts.extend(p.atoms()?);
                p.expect(Tok::Dot, "`.`")?;
            }
            Tok::Question => {
                p.next();
                doc.queries.push(p.atoms()?);
                p.expect(Tok::Dot, "`.`")?;
            }
            _ => raw.push(p.rule()?),
        }
    }

    let labels: BTreeSet<String> = raw.iter().filter_map(|r| r.label.clone()).collect();
    let mut seen = BTreeSet::new();
    let mut counter = 0;
    let mut rules = Vec::with_capacity(raw.len());
    for r in raw {
        let id = match r.label {
            Some(l) => {
                if !seen.insert(l.clone()) {
                    return Err(at(r.pos, ParseErrorKind::DuplicateLabel(l)));
                }
                l
            }
            None => loop {
                counter += 1;
                let id = format!("R{counter}");
                if !labels.contains(&id) && seen.insert(id.clone()) {
                    break id;
                }
            },
        };
        let negative_pos: Vec<Pos> = r.negative.iter().map(|(_, p)| *p).collect();
        let negative: Vec<Atom> = r.negative.into_iter().map(|(a, _)| a).collect();
        match Rule::new(id, r.body, negative.clone(), r.head) {
            Ok(rule) => {
                rules.push(rule);
                doc.rule_lines.push(r.pos.line);
            }
            Err(RuleError::UnsafeNegation { var, .. }) => {
                let idx = negative.iter().position(|a| a.contains_var(&var)).unwrap_or(0);
                return Err(at(
                    negative_pos.get(idx).copied().unwrap_or(r.pos),
                    ParseErrorKind::NegativeVariable(var),
                ));
            }
            Err(e) => return Err(syntax(r.pos, e.to_string())),
        }
    }
    doc.rules = RuleSet::new(rules).map_err(|e| syntax(Pos { line: 1, column: 1 }, e.to_string()))?;
    Ok(doc)
}

/// Parses raw bytes, reporting invalid UTF-8 as an error rather than panicking.
pub fn parse_bytes(bytes: &[u8]) -> Result<Document, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count();
            let column = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count();
            Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::Encoding,
            })
        }
    }
}

pub fn parse_rules(text: &str) -> Result<RuleSet, ParseError> {
    parse(text).map(|d| d.rules)
}

fn join(atoms: &[Atom]) -> String {
    atoms
        .iter()
        .map(Atom::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn serialize_rules(rules: &RuleSet) -> String {
    rules.to_string()
}

pub fn serialize(doc: &Document) -> String {
    let mut out = serialize_rules(&doc.rules);
    for f in &doc.facts {
        let _ = writeln!(out, "! {f}.");
    }
    for q in &doc.queries {
        let _ = writeln!(out, "? {}.", join(q));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{atom, skolemize};

    #[test]
    fn parses_rule_with_existential() {
        let d = parse("[R1] h(X) -> p(X,Y).").unwrap();
        let r = d.rules.get(0);
        assert_eq!(r.id, "R1");
        assert_eq!(r.body, vec![atom("h", &["X"])]);
        assert_eq!(r.existentials(), vec!["Y"]);
    }

    #[test]
    fn parses_facts_queries_and_negation() {
        let d = parse("% comment\n! p(a,b).\n[R] q(X), not p(X,X) -> r(X,Y).\n? p(a,X), p(X,Y).").unwrap();
        assert_eq!(d.facts, vec![atom("p", &["a", "b"])]);
        assert_eq!(d.rules.get(0).negative, vec![atom("p", &["X", "X"])]);
        assert_eq!(d.queries.len(), 1);
        assert_eq!(d.queries[0].len(), 2);
    }

    #[test]
    fn arity_conflict() {
        let e = parse("p(X) -> q(X,Y,Z). p(X) -> q(X).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ArityConflict { first: 3, second: 1, .. }));
        assert_eq!((e.line, e.column), (1, 27));
    }

    #[test]
    fn semantic_errors_carry_positions() {
        let e = parse("q(X), not p(Y) -> r(X).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NegativeVariable("Y".into()));
        assert_eq!(e.column, 11);
        let e = parse("\n  fr(X) -> p(X).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ReservedPredicate);
        assert_eq!((e.line, e.column), (2, 3));
        let e = parse("[A] p(X) -> q(X). [A] q(X) -> p(X).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateLabel("A".into()));
        let e = parse("p(X) -> q(X)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn unlabelled_rules_get_fresh_ids() {
        let d = parse("p(X) -> q(X). [R1] q(X) -> p(X). q(X) -> r(X).").unwrap();
        let ids: Vec<_> = d.rules.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["R2", "R1", "R3"]);
    }

    #[test]
    fn round_trip_is_stable() {
        let text = "[R1] h(X) -> p(X,Y).\n[R2] p(U,V), q(V) -> h(V).\n[N] q(X), not p(X,X) -> r(X).\n! p(a,b).\n? p(a,X).\n";
        let d = parse(text).unwrap();
        let s = serialize(&d);
        let d2 = parse(&s).unwrap();
        assert_eq!(d, d2);
        assert_eq!(serialize(&d2), s);
        assert!(s.contains("not p(X_N,X_N)"));
    }

    #[test]
    fn skolem_terms_round_trip() {
        let d = parse("[R] p(X,Y) -> p(X,Z).").unwrap();
        let sk = skolemize(&d.rules);
        let text = serialize_rules(&sk);
        assert!(text.contains("f_R_Z(X)"));
        assert_eq!(parse_rules(&text).unwrap(), sk);
    }

    #[test]
    fn empty_body_and_reserved_prefix() {
        let d = parse("-> p(a). __thm1_p_1(X) -> p(X).").unwrap();
        assert!(d.rules.get(0).body.is_empty());
        assert_eq!(d.rules.get(1).body[0].predicate, "__thm1_p_1");
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let e = parse_bytes(b"p(X) -> \xff").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Encoding);
    }
}
