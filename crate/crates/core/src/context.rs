//! Contexts (pomsets with one hole) and multi-contexts.

use std::fmt;

use thiserror::Error;

use crate::pomset::{Alphabet, Atom, Op, Pomset};
use crate::term::{parse_term, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("expected {expected} argument(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("holes must be a single `_` or `_1`..`_m` each used once, found {0:?}")]
    BadHoles(Vec<u8>),
}

/// Which side of the operator the hole sits on when wrapping a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `c[□ ∘ s]`
    Left,
    /// `c[s ∘ □]`
    Right,
}

/// A pomset with exactly one `_` hole.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context(Pomset);

impl Context {
    /// The identity context `_`.
    pub fn hole() -> Context {
        Context(Pomset::hole(0))
    }

    pub fn from_pomset(p: Pomset) -> Result<Context, ContextError> {
        let holes = p.holes();
        if holes != [0] {
            return Err(ContextError::BadHoles(holes));
        }
        Ok(Context(p))
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Context, ParseError> {
        let p = parse_term(text, alphabet)?.canonicalize();
        let holes = p.holes();
        Context::from_pomset(p).map_err(|_| ParseError::BadHoles {
            found: holes.iter().map(|j| Atom::Hole(*j).to_string()).collect(),
        })
    }

    pub fn is_hole(&self) -> bool {
        matches!(&self.0, Pomset::Atom(Atom::Hole(0)))
    }

    pub fn as_pomset(&self) -> &Pomset {
        &self.0
    }

    /// `c[w]`.
    pub fn fill(&self, w: &Pomset) -> Pomset {
        self.0.replace_atoms(&|a| match a {
            Atom::Hole(0) => Some(w.clone()),
            _ => None,
        })
    }

    /// `self[inner]`, again a context.
    pub fn compose(&self, inner: &Context) -> Context {
        Context(self.fill(&inner.0))
    }

    /// `self[□ ∘ s]` for [`Side::Left`], `self[s ∘ □]` for [`Side::Right`].
    pub fn wrap(&self, op: Op, side: Side, s: &Pomset) -> Context {
        let hole = Pomset::hole(0);
        let inner = match side {
            Side::Left => op.apply(&hole, s),
            Side::Right => op.apply(s, &hole),
        };
        Context(self.fill(&inner))
    }

    pub fn size(&self) -> usize {
        self.0.size() - 1
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Context({})", self.0)
    }
}

/// A pomset with holes `_1`..`_m`, each occurring once. A lone `_` is also
/// accepted as a 1-context; arity 0 is a plain pomset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiContext {
    pomset: Pomset,
    arity: usize,
    anonymous: bool,
}

impl MultiContext {
    pub fn from_pomset(p: Pomset) -> Result<MultiContext, ContextError> {
        let mut holes = p.holes();
        if holes == [0] {
            return Ok(MultiContext {
                pomset: p,
                arity: 1,
                anonymous: true,
            });
        }
        holes.sort_unstable();
        let expected: Vec<u8> = (1..=holes.len() as u8).collect();
        if holes != expected {
            return Err(ContextError::BadHoles(holes));
        }
        Ok(MultiContext {
            arity: holes.len(),
            pomset: p,
            anonymous: false,
        })
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<MultiContext, ParseError> {
        let p = parse_term(text, alphabet)?.canonicalize();
        let holes = p.holes();
        MultiContext::from_pomset(p).map_err(|_| ParseError::BadHoles {
            found: holes.iter().map(|j| Atom::Hole(*j).to_string()).collect(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn as_pomset(&self) -> &Pomset {
        &self.pomset
    }

    /// `c[w_1, ..., w_m]`.
    pub fn substitute(&self, args: &[Pomset]) -> Result<Pomset, ContextError> {
        if args.len() != self.arity {
            return Err(ContextError::ArityMismatch {
                expected: self.arity,
                got: args.len(),
            });
        }
        let anonymous = self.anonymous;
        Ok(self.pomset.replace_atoms(&|a| match a {
            Atom::Hole(0) if anonymous => Some(args[0].clone()),
            Atom::Hole(j) if !anonymous && *j >= 1 => Some(args[*j as usize - 1].clone()),
            _ => None,
        }))
    }
}

impl From<Context> for MultiContext {
    fn from(c: Context) -> Self {
        MultiContext {
            pomset: c.0,
            arity: 1,
            anonymous: true,
        }
    }
}

impl fmt::Display for MultiContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pomset)
    }
}

impl fmt::Debug for MultiContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiContext({}, arity {})", self.pomset, self.arity)
    }
}

/// A split `(c, z)` of some pomset `w = c[z]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Split {
    pub context: Context,
    pub sub: Pomset,
}

impl Split {
    pub fn new(context: Context, sub: Pomset) -> Split {
        Split { context, sub }
    }

    pub fn recompose(&self) -> Pomset {
        self.context.fill(&self.sub)
    }
}
