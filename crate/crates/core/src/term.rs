//! Syntactic terms: full binary trees over letters, `eps`, holes and the two
//! operators, together with the term grammar.
//!
//! ```text
//! term   := par ;
//! par    := seq ( "||" seq )* ;
//! seq    := atom ( "."? atom )* ;
//! atom   := LETTER | "eps" | HOLE | "(" par ")" ;
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::pomset::{is_letter_symbol, Alphabet, Atom, Letter, Op, Pomset, EPSILON_KEYWORD};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Epsilon,
    Leaf(Atom),
    Inner(Op, Arc<Term>, Arc<Term>),
}

/// Result of splitting a term at its root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decomposition<'a> {
    Atom,
    Split(Op, &'a Term, &'a Term),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown letter `{letter}` at byte {position}")]
    UnknownLetter { position: usize, letter: String },
    #[error("reserved word `{word}` used as a letter at byte {position}")]
    Reserved { position: usize, word: String },
    #[error("holes are not allowed here (byte {position})")]
    UnexpectedHole { position: usize },
    #[error("context must contain exactly one `_` hole, found {found:?}")]
    BadHoles { found: Vec<String> },
}

impl Term {
    pub fn letter(l: Letter) -> Term {
        Term::Leaf(Atom::Letter(l))
    }

    pub fn inner(op: Op, left: Term, right: Term) -> Term {
        Term::Inner(op, Arc::new(left), Arc::new(right))
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Epsilon | Term::Leaf(_) => 0,
            Term::Inner(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Term::Epsilon | Term::Leaf(_) => 1,
            Term::Inner(_, l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn contains_epsilon(&self) -> bool {
        match self {
            Term::Epsilon => true,
            Term::Leaf(_) => false,
            Term::Inner(_, l, r) => l.contains_epsilon() || r.contains_epsilon(),
        }
    }

    /// The pomset this term denotes.
    pub fn canonicalize(&self) -> Pomset {
        match self {
            Term::Epsilon => Pomset::Empty,
            Term::Leaf(a) => Pomset::Atom(a.clone()),
            Term::Inner(op, l, r) => op.apply(&l.canonicalize(), &r.canonicalize()),
        }
    }

    pub fn root_decomposition(&self) -> Decomposition<'_> {
        match self {
            Term::Epsilon | Term::Leaf(_) => Decomposition::Atom,
            Term::Inner(op, l, r) => Decomposition::Split(*op, l, r),
        }
    }

    /// All subterms in prefix order, the term itself first.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            if let Term::Inner(_, l, r) = t {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Term, ParseError> {
        parse_term(text, alphabet)
    }
}

/// Canonical pomset of a term.
pub fn canonicalize(t: &Term) -> Pomset {
    t.canonicalize()
}

/// Balanced, epsilon-free (unless `w` is empty) binary term for `w`.
/// Every n-ary node becomes a balanced subtree of depth `ceil(log2 n)`;
/// the left half receives `floor(n / 2)` children.
pub fn canonical_term(w: &Pomset) -> Term {
    match w {
        Pomset::Empty => Term::Epsilon,
        Pomset::Atom(a) => Term::Leaf(a.clone()),
        Pomset::Seq(ch) => balanced(Op::Seq, ch),
        Pomset::Par(ch) => balanced(Op::Par, ch),
    }
}

fn balanced(op: Op, children: &[Pomset]) -> Term {
    if children.len() == 1 {
        return canonical_term(&children[0]);
    }
    let (l, r) = children.split_at(children.len() / 2);
    Term::inner(op, balanced(op, l), balanced(op, r))
}

/// Pomsets denoted by all subterms of the canonical term of `w`.
pub fn subpomsets(w: &Pomset) -> BTreeSet<Pomset> {
    canonical_term(w)
        .subterms()
        .into_iter()
        .map(Term::canonicalize)
        .collect()
}

// ---------------------------------------------------------------------------
// Printing

fn needs_parens(parent: Op, child: &Term, is_right: bool) -> bool {
    match (parent, child) {
        (_, Term::Epsilon | Term::Leaf(_)) => false,
        (Op::Seq, Term::Inner(Op::Par, ..)) => true,
        (Op::Seq, Term::Inner(Op::Seq, ..)) => is_right,
        (Op::Par, Term::Inner(Op::Seq, ..)) => false,
        (Op::Par, Term::Inner(Op::Par, ..)) => is_right,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Epsilon => f.write_str(EPSILON_KEYWORD),
            Term::Leaf(a) => write!(f, "{a}"),
            Term::Inner(op, l, r) => {
                let write_child = |f: &mut fmt::Formatter<'_>, c: &Term, right: bool| {
                    if needs_parens(*op, c, right) {
                        write!(f, "({c})")
                    } else {
                        write!(f, "{c}")
                    }
                };
                write_child(f, l, false)?;
                match op {
                    Op::Seq => f.write_str(" ")?,
                    Op::Par => f.write_str(" || ")?,
                }
                write_child(f, r, true)
            }
        }
    }
}

/// Prints a term with minimal parentheses.
pub fn format_term(t: &Term) -> String {
    t.to_string()
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Eps,
    Hole(u8),
    LParen,
    RParen,
    Bar,
    Dot,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b'.' => {
                out.push((i, Token::Dot));
                i += 1;
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    out.push((i, Token::Bar));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax {
                        position: i,
                        message: "expected `||`".into(),
                    });
                }
            }
            _ if c == b'_' || c.is_ascii_alphanumeric() => {
                let start = i;
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = if word == "_" {
                    Token::Hole(0)
                } else if let Some(rest) = word.strip_prefix('_') {
                    match rest.as_bytes() {
                        [d @ b'1'..=b'9'] => Token::Hole(d - b'0'),
                        _ => {
                            return Err(ParseError::Syntax {
                                position: start,
                                message: format!("invalid hole `{word}`"),
                            })
                        }
                    }
                } else if word == EPSILON_KEYWORD {
                    Token::Eps
                } else if is_letter_symbol(word) {
                    Token::Ident(word.to_string())
                } else {
                    return Err(ParseError::Syntax {
                        position: start,
                        message: format!("invalid identifier `{word}`"),
                    });
                };
                out.push((start, tok));
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: i,
                    message: format!(
                        "unexpected character `{}`",
                        text[i..].chars().next().unwrap()
                    ),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    alphabet: Option<&'a Alphabet>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn par(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.seq()?;
        while self.peek() == Some(&Token::Bar) {
            self.pos += 1;
            let rhs = self.seq()?;
            acc = Term::inner(Op::Par, acc, rhs);
        }
        Ok(acc)
    }

    fn seq(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.atom()?;
        loop {
            match self.peek() {
                Some(Token::Dot) => {
                    self.pos += 1;
                    let rhs = self.atom()?;
                    acc = Term::inner(Op::Seq, acc, rhs);
                }
                Some(Token::Ident(_) | Token::Eps | Token::Hole(_) | Token::LParen) => {
                    let rhs = self.atom()?;
                    acc = Term::inner(Op::Seq, acc, rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let position = self.offset();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ParseError::Syntax {
                position,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok {
            Token::Eps => Ok(Term::Epsilon),
            Token::Hole(j) => Ok(Term::Leaf(Atom::Hole(j))),
            Token::Ident(word) => {
                let letter = match self.alphabet {
                    Some(sigma) => sigma.get(&word).cloned().ok_or(ParseError::UnknownLetter {
                        position,
                        letter: word.clone(),
                    })?,
                    None => Letter::new(&word).map_err(|_| ParseError::Reserved {
                        position,
                        word: word.clone(),
                    })?,
                };
                Ok(Term::letter(letter))
            }
            Token::LParen => {
                let inner = self.par()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(ParseError::Syntax {
                        position: self.offset(),
                        message: "expected `)`".into(),
                    }),
                }
            }
            Token::RParen | Token::Bar | Token::Dot => Err(ParseError::Syntax {
                position,
                message: "expected a letter, `eps`, a hole or `(`".into(),
            }),
        }
    }
}

fn parse_with(text: &str, alphabet: Option<&Alphabet>) -> Result<Term, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        alphabet,
    };
    let t = p.par()?;
    if p.pos != p.tokens.len() {
        return Err(ParseError::Syntax {
            position: p.offset(),
            message: "trailing input".into(),
        });
    }
    Ok(t)
}

/// Parses a term whose letters must belong to `alphabet`. Holes are accepted
/// by the grammar; callers that need plain pomsets reject them afterwards.
pub fn parse_term(text: &str, alphabet: &Alphabet) -> Result<Term, ParseError> {
    parse_with(text, Some(alphabet))
}

/// Parses a term accepting any well-formed letter.
pub fn parse_term_unchecked(text: &str) -> Result<Term, ParseError> {
    parse_with(text, None)
}

/// Parses a hole-free pomset over `alphabet`.
pub fn parse_pomset(text: &str, alphabet: &Alphabet) -> Result<Pomset, ParseError> {
    let t = parse_term(text, alphabet)?;
    let p = t.canonicalize();
    if p.has_holes() {
        return Err(ParseError::UnexpectedHole {
            position: text.find('_').unwrap_or(0),
        });
    }
    Ok(p)
}

impl Pomset {
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Pomset, ParseError> {
        parse_pomset(text, alphabet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma() -> Alphabet {
        Alphabet::from_symbols("a b c").unwrap()
    }

    fn leaf(s: &str) -> Term {
        Term::letter(Letter::new(s).unwrap())
    }

    fn p(s: &str) -> Pomset {
        parse_pomset(s, &sigma()).unwrap()
    }

    #[test]
    fn parses_nested_pomset() {
        let t = parse_term("a (b || b) c (b a || b b)", &sigma()).unwrap();
        assert_eq!(t.leaf_count(), 8);
        assert_eq!(t.canonicalize().size(), 8);
    }

    #[test]
    fn parses_eps_and_precedence() {
        assert_eq!(parse_term("eps", &sigma()).unwrap(), Term::Epsilon);
        let t = parse_term("(b c) || a", &sigma()).unwrap();
        let expected = Term::inner(
            Op::Par,
            Term::inner(Op::Seq, leaf("b"), leaf("c")),
            leaf("a"),
        );
        assert_eq!(t, expected);
        // sequence binds tighter than parallel
        assert_eq!(parse_term("b c || a", &sigma()).unwrap(), expected);
        assert_eq!(parse_term("b . c || a", &sigma()).unwrap(), expected);
    }

    #[test]
    fn left_associative() {
        let t = parse_term("a b c", &sigma()).unwrap();
        let expected = Term::inner(
            Op::Seq,
            Term::inner(Op::Seq, leaf("a"), leaf("b")),
            leaf("c"),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_term("a d", &sigma()),
            Err(ParseError::UnknownLetter { position: 2, .. })
        ));
        assert!(matches!(
            parse_term("a ||", &sigma()),
            Err(ParseError::Syntax { position: 4, .. })
        ));
        assert!(matches!(
            parse_term("(a b", &sigma()),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_term("a | b", &sigma()),
            Err(ParseError::Syntax { position: 2, .. })
        ));
        assert!(matches!(
            parse_term("_0", &sigma()),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_term("A", &sigma()),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_pomset("a _", &sigma()),
            Err(ParseError::UnexpectedHole { .. })
        ));
        assert!(parse_term("", &sigma()).is_err());
    }

    #[test]
    fn canonicalization_examples() {
        assert_eq!(p("a || b c"), p("b c || a"));
        assert_eq!(p("a . eps || b"), p("a || b"));
        assert_eq!(p("eps"), Pomset::Empty);
        assert_eq!(p("(a b) c"), p("a (b c)"));
    }

    #[test]
    fn canonical_term_shapes() {
        let t = canonical_term(&p("(b c) || a"));
        assert_eq!(t.depth(), 2);
        match t.root_decomposition() {
            Decomposition::Split(Op::Par, l, r) => {
                assert_eq!(l.canonicalize(), p("b c"));
                assert_eq!(r.canonicalize(), p("a"));
            }
            other => panic!("unexpected decomposition {other:?}"),
        }
        assert_eq!(canonical_term(&Pomset::Empty), Term::Epsilon);
        assert_eq!(leaf("a").root_decomposition(), Decomposition::Atom);
    }

    #[test]
    fn printer_round_trips() {
        for text in [
            "a (b || b) c (b a || b b)",
            "(b c) || a",
            "a (b c)",
            "a || (b || c)",
            "eps",
            "(a || b) c",
        ] {
            let t = parse_term(text, &sigma()).unwrap();
            let printed = format_term(&t);
            assert_eq!(
                parse_term(&printed, &sigma()).unwrap(),
                t,
                "{text} -> {printed}"
            );
        }
        assert_eq!(
            format_term(&parse_term("((a)) (b)", &sigma()).unwrap()),
            "a b"
        );
        assert_eq!(
            format_term(&parse_term("a (b c)", &sigma()).unwrap()),
            "a (b c)"
        );
    }

    #[test]
    fn subpomsets_of_a_parallel_pomset() {
        let subs = subpomsets(&p("(b c) || a"));
        for s in ["a", "b", "c", "b c", "(b c) || a"] {
            assert!(subs.contains(&p(s)), "missing {s}");
        }
        assert_eq!(subpomsets(&p("a")), BTreeSet::from([p("a")]));
        assert!(subpomsets(&Pomset::Empty).contains(&Pomset::Empty));
    }
}
