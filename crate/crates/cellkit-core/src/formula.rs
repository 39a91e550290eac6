//! Formulas of the multi-agent epistemic language and their parser.
//!
//! The core language has exactly four constructors: atoms, negation,
//! conjunction, and one knowledge operator per agent. The concrete syntax
//! additionally accepts `|`, `->`, and `<->`, which the parser removes:
//!
//! - `f | g` becomes `~(~f & ~g)`
//! - `f -> g` becomes `~(f & ~g)`
//! - `f <-> g` becomes `(f -> g) & (g -> f)`, each side desugared
//!
//! Grammar, loosest binding first (`->` and `<->` are right-associative,
//! `&` and `|` left-associative):
//!
//! ```text
//! formula := iff
//! iff     := imp ("<->" imp)*
//! imp     := or ("->" or)*
//! or      := and ("|" and)*
//! and     := unary ("&" unary)*
//! unary   := "~" unary | "K" AGENT unary | "(" formula ")" | ATOM
//! ATOM, AGENT := [A-Za-z0-9_]+
//! ```
//!
//! An identifier beginning with `K` is always read as the knowledge operator
//! followed by an agent name (`K1 x` and `K 1 x` are the same formula), so
//! atoms must not start with a capital `K`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Know(String, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(left: Formula, right: Formula) -> Self {
        Formula::And(Box::new(left), Box::new(right))
    }

    pub fn know(agent: impl Into<String>, f: Formula) -> Self {
        Formula::Know(agent.into(), Box::new(f))
    }

    /// `f | g` as `~(~f & ~g)`.
    pub fn or(left: Formula, right: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(left), Formula::not(right)))
    }

    /// `f -> g` as `~(f & ~g)`.
    pub fn implies(left: Formula, right: Formula) -> Self {
        Formula::not(Formula::and(left, Formula::not(right)))
    }

    /// `f <-> g` as `(f -> g) & (g -> f)`.
    pub fn iff(left: Formula, right: Formula) -> Self {
        Formula::and(
            Formula::implies(left.clone(), right.clone()),
            Formula::implies(right, left),
        )
    }

    /// Maximum nesting depth of knowledge operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(l, r) => l.modal_depth().max(r.modal_depth()),
            Formula::Know(_, f) => 1 + f.modal_depth(),
        }
    }

    /// Canonical fully parenthesized text; `parse(render(f))` returns `f`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }

    fn write_to(&self, out: &mut String) {
        match self {
            Formula::Atom(name) => out.push_str(name),
            Formula::Not(f) => {
                out.push_str("(~");
                f.write_to(out);
                out.push(')');
            }
            Formula::And(l, r) => {
                out.push('(');
                l.write_to(out);
                out.push_str(" & ");
                r.write_to(out);
                out.push(')');
            }
            Formula::Know(agent, f) => {
                out.push_str("(K");
                out.push_str(agent);
                out.push(' ');
                f.write_to(out);
                out.push(')');
            }
        }
    }

    /// All atom names occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut set = BTreeSet::new();
        self.collect(&mut set, &mut BTreeSet::new());
        set
    }

    /// All agent names occurring in the formula.
    pub fn agents(&self) -> BTreeSet<&str> {
        let mut set = BTreeSet::new();
        self.collect(&mut BTreeSet::new(), &mut set);
        set
    }

    fn collect<'f>(&'f self, atoms: &mut BTreeSet<&'f str>, agents: &mut BTreeSet<&'f str>) {
        match self {
            Formula::Atom(name) => {
                atoms.insert(name);
            }
            Formula::Not(f) => f.collect(atoms, agents),
            Formula::And(l, r) => {
                l.collect(atoms, agents);
                r.collect(atoms, agents);
            }
            Formula::Know(agent, f) => {
                agents.insert(agent);
                f.collect(atoms, agents);
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown atom `{name}` at byte {position}")]
    UnknownAtom { name: String, position: usize },
    #[error("unknown agent `{name}` at byte {position}")]
    UnknownAgent { name: String, position: usize },
}

/// Parse a formula without checking atom or agent names.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    Parser::new(text, None)?.run()
}

/// Parse a formula, rejecting atoms outside `atoms` and agents outside
/// `agents`.
pub fn parse_strict(
    text: &str,
    atoms: &[String],
    agents: &[String],
) -> Result<Formula, ParseError> {
    Parser::new(text, Some((atoms, agents)))?.run()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Tilde,
    Amp,
    Pipe,
    Arrow,
    Iff,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'~' => {
                toks.push((Tok::Tilde, i));
                i += 1;
            }
            b'&' => {
                toks.push((Tok::Amp, i));
                i += 1;
            }
            b'|' => {
                toks.push((Tok::Pipe, i));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Arrow, i));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax {
                        position: i,
                        message: "expected `->`".into(),
                    });
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') {
                    toks.push((Tok::Iff, i));
                    i += 3;
                } else {
                    return Err(ParseError::Syntax {
                        position: i,
                        message: "expected `<->`".into(),
                    });
                }
            }
            _ if b.is_ascii_alphanumeric() || b == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: i,
                    message: format!("unexpected character `{}`", &text[i..][..1]),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vocab: Option<(&'a [String], &'a [String])>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, vocab: Option<(&'a [String], &'a [String])>) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            end: text.len(),
            vocab,
        })
    }

    fn run(mut self) -> Result<Formula, ParseError> {
        let f = self.iff()?;
        if let Some((_, at)) = self.toks.get(self.pos) {
            return Err(ParseError::Syntax {
                position: *at,
                message: "trailing input after formula".into(),
            });
        }
        Ok(f)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.imp()?];
        while self.peek() == Some(&Tok::Iff) {
            self.bump();
            parts.push(self.imp()?);
        }
        // Right-associative fold.
        let mut f = parts.pop().expect("at least one operand");
        while let Some(left) = parts.pop() {
            f = Formula::iff(left, f);
        }
        Ok(f)
    }

    fn imp(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.or()?];
        while self.peek() == Some(&Tok::Arrow) {
            self.bump();
            parts.push(self.or()?);
        }
        let mut f = parts.pop().expect("at least one operand");
        while let Some(left) = parts.pop() {
            f = Formula::implies(left, f);
        }
        Ok(f)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.bump() {
            Some((Tok::Tilde, _)) => Ok(Formula::not(self.unary()?)),
            Some((Tok::LParen, at)) => {
                let f = self.iff()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(f),
                    _ => Err(ParseError::Syntax {
                        position: at,
                        message: "unclosed `(`".into(),
                    }),
                }
            }
            Some((Tok::Ident(name), at)) => {
                if let Some(rest) = name.strip_prefix('K') {
                    let (agent, agent_at) = if rest.is_empty() {
                        match self.bump() {
                            Some((Tok::Ident(agent), agent_at)) => (agent, agent_at),
                            _ => {
                                return Err(ParseError::Syntax {
                                    position: at,
                                    message: "`K` must be followed by an agent name".into(),
                                })
                            }
                        }
                    } else {
                        (rest.to_string(), at + 1)
                    };
                    if let Some((_, agents)) = self.vocab {
                        if !agents.contains(&agent) {
                            return Err(ParseError::UnknownAgent {
                                name: agent,
                                position: agent_at,
                            });
                        }
                    }
                    Ok(Formula::know(agent, self.unary()?))
                } else {
                    if let Some((atoms, _)) = self.vocab {
                        if !atoms.contains(&name) {
                            return Err(ParseError::UnknownAtom { name, position: at });
                        }
                    }
                    Ok(Formula::Atom(name))
                }
            }
            Some((tok, at)) => Err(ParseError::Syntax {
                position: at,
                message: format!("expected a formula, found `{tok:?}`"),
            }),
            None => Err(ParseError::Syntax {
                position: self.end,
                message: "expected a formula, found end of input".into(),
            }),
        }
    }
}

/// Seeded random formula over the given vocabulary, with knowledge operators
/// nested at most `max_depth` deep. Used by the soundness suites and the
/// property tests; deterministic for a fixed generator state.
pub fn random_formula<R: Rng>(
    rng: &mut R,
    atoms: &[String],
    agents: &[String],
    max_depth: usize,
) -> Formula {
    assert!(
        !atoms.is_empty(),
        "formula sampling needs at least one atom"
    );
    let leaf = |rng: &mut R| Formula::Atom(atoms[rng.gen_range(0..atoms.len())].clone());
    if max_depth == 0 {
        // Allow a little propositional structure below the last operator.
        return match rng.gen_range(0..4) {
            0 => Formula::not(leaf(rng)),
            1 => Formula::and(leaf(rng), leaf(rng)),
            _ => leaf(rng),
        };
    }
    match rng.gen_range(0..5) {
        0 => leaf(rng),
        1 => Formula::not(random_formula(rng, atoms, agents, max_depth - 1)),
        2 => Formula::and(
            random_formula(rng, atoms, agents, max_depth - 1),
            random_formula(rng, atoms, agents, max_depth - 1),
        ),
        _ if !agents.is_empty() => {
            let agent = agents[rng.gen_range(0..agents.len())].clone();
            Formula::know(agent, random_formula(rng, atoms, agents, max_depth - 1))
        }
        _ => leaf(rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atom(n: &str) -> Formula {
        Formula::atom(n)
    }

    #[test]
    fn parses_knowledge_and_negation() {
        let f = parse("K1 (x & ~K2 x)").unwrap();
        assert_eq!(
            f,
            Formula::know(
                "1",
                Formula::and(atom("x"), Formula::not(Formula::know("2", atom("x"))))
            )
        );
    }

    #[test]
    fn implication_desugars_to_core_connectives() {
        assert_eq!(
            parse("x -> y").unwrap(),
            Formula::not(Formula::and(atom("x"), Formula::not(atom("y"))))
        );
    }

    #[test]
    fn whitespace_between_k_and_agent_is_optional() {
        assert_eq!(parse("K1 x").unwrap(), parse("K 1 x").unwrap());
    }

    #[test]
    fn arrow_is_right_associative() {
        assert_eq!(
            parse("x -> y -> z").unwrap(),
            Formula::implies(atom("x"), Formula::implies(atom("y"), atom("z")))
        );
    }

    #[test]
    fn and_binds_tighter_than_or_and_arrow() {
        assert_eq!(
            parse("x & y | z").unwrap(),
            Formula::or(Formula::and(atom("x"), atom("y")), atom("z"))
        );
        assert_eq!(
            parse("x | y -> z").unwrap(),
            Formula::implies(Formula::or(atom("x"), atom("y")), atom("z"))
        );
    }

    #[test]
    fn iff_expands_to_both_implications() {
        assert_eq!(
            parse("x <-> y").unwrap(),
            Formula::iff(atom("x"), atom("y"))
        );
    }

    #[test]
    fn strict_mode_rejects_unknown_names() {
        let atoms = vec!["x".to_string()];
        let agents = vec!["1".to_string(), "2".to_string()];
        assert!(matches!(
            parse_strict("K3 x", &atoms, &agents),
            Err(ParseError::UnknownAgent { name, .. }) if name == "3"
        ));
        assert!(matches!(
            parse_strict("K1 y", &atoms, &agents),
            Err(ParseError::UnknownAtom { name, .. }) if name == "y"
        ));
        assert!(parse_strict("K1 ~x", &atoms, &agents).is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("x & ") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("x @ y") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("(x & y") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 0),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn bare_k_needs_an_agent() {
        assert!(parse("K").is_err());
        assert!(parse("x & K").is_err());
    }

    #[test]
    fn render_examples() {
        assert_eq!(atom("x").render(), "x");
        assert_eq!(Formula::know("1", atom("x")).render(), "(K1 x)");
        assert_eq!(
            Formula::not(Formula::and(atom("x"), atom("y"))).render(),
            "(~(x & y))"
        );
    }

    #[test]
    fn modal_depth_examples() {
        assert_eq!(parse("x").unwrap().modal_depth(), 0);
        assert_eq!(parse("K1 x").unwrap().modal_depth(), 1);
        assert_eq!(parse("K1 (x & ~K2 x)").unwrap().modal_depth(), 2);
    }

    #[test]
    fn vocabulary_collection() {
        let f = parse("K1 (x & ~K2 y)").unwrap();
        assert_eq!(f.atoms(), ["x", "y"].into_iter().collect());
        assert_eq!(f.agents(), ["1", "2"].into_iter().collect());
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        // Atom names must not start with a capital K, agents are free.
        let atom = "[a-jl-z][a-z0-9_]{0,2}".prop_map(Formula::Atom);
        atom.prop_recursive(6, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
                ("[A-Za-z0-9_]{1,3}", inner).prop_map(|(j, f)| Formula::know(j, f)),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(f in arb_formula()) {
            let text = f.render();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
