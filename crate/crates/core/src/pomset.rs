//! Series-parallel pomsets in canonical normal form.
//!
//! A [`Pomset`] is stored as a flattened n-ary tree: sequential nodes never
//! have sequential children, parallel nodes never have parallel children,
//! the empty pomset never occurs below the root, and parallel children are
//! kept sorted. Two pomsets are therefore equal exactly when they are
//! structurally equal, which makes them usable as hash keys.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Reserved spelling of the empty pomset in the term syntax.
pub const EPSILON_KEYWORD: &str = "eps";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlphabetError {
    #[error("invalid letter `{0}`: letters match [a-z][a-z0-9_]*")]
    InvalidLetter(String),
    #[error("`{0}` is a reserved word and cannot be used as a letter")]
    Reserved(String),
    #[error("alphabet is empty")]
    Empty,
    #[error("letter `{0}` declared twice")]
    Duplicate(String),
}

/// A letter of the alphabet, e.g. `a` or `req_1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(Arc<str>);

impl Letter {
    pub fn new(symbol: &str) -> Result<Self, AlphabetError> {
        if symbol == EPSILON_KEYWORD {
            return Err(AlphabetError::Reserved(symbol.to_string()));
        }
        if !is_letter_symbol(symbol) {
            return Err(AlphabetError::InvalidLetter(symbol.to_string()));
        }
        Ok(Letter(Arc::from(symbol)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_letter_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered, duplicate-free, nonempty set of letters. Iteration follows
/// declaration order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    letters: Vec<Letter>,
}

impl Alphabet {
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Result<Self, AlphabetError> {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.contains(&l) {
                return Err(AlphabetError::Duplicate(l.as_str().to_string()));
            }
            out.push(l);
        }
        if out.is_empty() {
            return Err(AlphabetError::Empty);
        }
        Ok(Alphabet { letters: out })
    }

    /// Parses a whitespace separated list of symbols.
    pub fn from_symbols(text: &str) -> Result<Self, AlphabetError> {
        let letters = text
            .split_whitespace()
            .map(Letter::new)
            .collect::<Result<Vec<_>, _>>()?;
        Alphabet::new(letters)
    }

    /// The first `n` letters of `a`, `b`, `c`, ... (falling back to `l26`,
    /// `l27`, ... past `z`).
    pub fn standard(n: usize) -> Result<Self, AlphabetError> {
        let letters = (0..n)
            .map(|i| {
                if i < 26 {
                    Letter::new(&((b'a' + i as u8) as char).to_string())
                } else {
                    Letter::new(&format!("l{i}"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Alphabet::new(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn contains(&self, letter: &Letter) -> bool {
        self.letters.contains(letter)
    }

    pub fn get(&self, symbol: &str) -> Option<&Letter> {
        self.letters.iter().find(|l| l.as_str() == symbol)
    }

    pub fn position(&self, letter: &Letter) -> Option<usize> {
        self.letters.iter().position(|l| l == letter)
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.letters.iter()).finish()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// The two composition operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Seq,
    Par,
}

impl Op {
    pub const ALL: [Op; 2] = [Op::Seq, Op::Par];

    pub fn apply(self, left: &Pomset, right: &Pomset) -> Pomset {
        match self {
            Op::Seq => left.seq(right),
            Op::Par => left.par(right),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Seq => f.write_str("."),
            Op::Par => f.write_str("||"),
        }
    }
}

/// Leaf symbol of a pomset: a letter, or a hole placeholder of a context.
///
/// `Hole(0)` is the anonymous hole `_`; `Hole(j)` for `j` in `1..=9` is `_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Letter(Letter),
    Hole(u8),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Letter(l) => write!(f, "{l}"),
            Atom::Hole(0) => f.write_str("_"),
            Atom::Hole(j) => write!(f, "_{j}"),
        }
    }
}

/// A series-parallel pomset in canonical normal form.
///
/// The derived ordering (by node kind, then contents) is the fixed total
/// order used to sort parallel children.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pomset {
    #[default]
    Empty,
    Seq(Arc<[Pomset]>),
    Par(Arc<[Pomset]>),
    Atom(Atom),
}

impl Pomset {
    pub fn empty() -> Self {
        Pomset::Empty
    }

    pub fn letter(letter: Letter) -> Self {
        Pomset::Atom(Atom::Letter(letter))
    }

    pub(crate) fn hole(index: u8) -> Self {
        Pomset::Atom(Atom::Hole(index))
    }

    /// Sequential composition of all `parts`, in order.
    pub fn seq_all(parts: impl IntoIterator<Item = Pomset>) -> Pomset {
        let mut children = Vec::new();
        for p in parts {
            match p {
                Pomset::Empty => {}
                Pomset::Seq(ch) => children.extend(ch.iter().cloned()),
                other => children.push(other),
            }
        }
        match children.len() {
            0 => Pomset::Empty,
            1 => children.pop().unwrap(),
            _ => Pomset::Seq(children.into()),
        }
    }

    /// Parallel composition of all `parts`.
    pub fn par_all(parts: impl IntoIterator<Item = Pomset>) -> Pomset {
        let mut children = Vec::new();
        for p in parts {
            match p {
                Pomset::Empty => {}
                Pomset::Par(ch) => children.extend(ch.iter().cloned()),
                other => children.push(other),
            }
        }
        match children.len() {
            0 => Pomset::Empty,
            1 => children.pop().unwrap(),
            _ => {
                children.sort();
                Pomset::Par(children.into())
            }
        }
    }

    pub fn seq(&self, other: &Pomset) -> Pomset {
        Pomset::seq_all([self.clone(), other.clone()])
    }

    pub fn par(&self, other: &Pomset) -> Pomset {
        Pomset::par_all([self.clone(), other.clone()])
    }

    pub fn compose(op: Op, left: &Pomset, right: &Pomset) -> Pomset {
        op.apply(left, right)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Pomset::Empty)
    }

    pub fn as_letter(&self) -> Option<&Letter> {
        match self {
            Pomset::Atom(Atom::Letter(l)) => Some(l),
            _ => None,
        }
    }

    /// Children of an n-ary node (empty slice for atoms and `Empty`).
    pub fn children(&self) -> &[Pomset] {
        match self {
            Pomset::Seq(ch) | Pomset::Par(ch) => ch,
            _ => &[],
        }
    }

    /// Number of leaf occurrences (letters and holes).
    pub fn size(&self) -> usize {
        match self {
            Pomset::Empty => 0,
            Pomset::Atom(_) => 1,
            Pomset::Seq(ch) | Pomset::Par(ch) => ch.iter().map(Pomset::size).sum(),
        }
    }

    /// Depth of the canonical term of this pomset, i.e. the balanced
    /// binarization of every n-ary node.
    pub fn depth(&self) -> usize {
        match self {
            Pomset::Empty | Pomset::Atom(_) => 0,
            Pomset::Seq(ch) | Pomset::Par(ch) => balanced_depth(ch),
        }
    }

    /// Visits every atom occurrence, left to right.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Pomset::Empty => {}
            Pomset::Atom(a) => f(a),
            Pomset::Seq(ch) | Pomset::Par(ch) => ch.iter().for_each(|c| c.for_each_atom(f)),
        }
    }

    pub fn letters(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        self.for_each_atom(&mut |a| {
            if let Atom::Letter(l) = a {
                out.push(l.clone());
            }
        });
        out
    }

    /// Hole indices in left-to-right order, with repetitions.
    pub fn holes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.for_each_atom(&mut |a| {
            if let Atom::Hole(j) = a {
                out.push(*j);
            }
        });
        out
    }

    pub fn has_holes(&self) -> bool {
        match self {
            Pomset::Empty => false,
            Pomset::Atom(a) => matches!(a, Atom::Hole(_)),
            Pomset::Seq(ch) | Pomset::Par(ch) => ch.iter().any(Pomset::has_holes),
        }
    }

    /// First letter not contained in `alphabet`, if any.
    pub fn foreign_letter(&self, alphabet: &Alphabet) -> Option<Letter> {
        let mut found = None;
        self.for_each_atom(&mut |a| {
            if found.is_none() {
                if let Atom::Letter(l) = a {
                    if !alphabet.contains(l) {
                        found = Some(l.clone());
                    }
                }
            }
        });
        found
    }

    /// Replaces atoms by pomsets and re-canonicalizes. Subtrees without
    /// replaced atoms are shared with the original.
    pub(crate) fn replace_atoms(&self, f: &impl Fn(&Atom) -> Option<Pomset>) -> Pomset {
        match self {
            Pomset::Empty => Pomset::Empty,
            Pomset::Atom(a) => f(a).unwrap_or_else(|| self.clone()),
            Pomset::Seq(ch) => {
                if !self.has_holes() {
                    return self.clone();
                }
                Pomset::seq_all(ch.iter().map(|c| c.replace_atoms(f)))
            }
            Pomset::Par(ch) => {
                if !self.has_holes() {
                    return self.clone();
                }
                Pomset::par_all(ch.iter().map(|c| c.replace_atoms(f)))
            }
        }
    }

    /// Folds the pomset bottom-up with a bimonoid-style interpretation.
    ///
    /// n-ary nodes are folded left to right; this is only meaningful when
    /// the operations are associative (and `par` commutative).
    pub fn fold<T: Clone>(
        &self,
        unit: &T,
        atom: &mut impl FnMut(&Atom) -> T,
        op: &mut impl FnMut(Op, &T, &T) -> T,
    ) -> T {
        match self {
            Pomset::Empty => unit.clone(),
            Pomset::Atom(a) => atom(a),
            Pomset::Seq(ch) | Pomset::Par(ch) => {
                let kind = if matches!(self, Pomset::Seq(_)) {
                    Op::Seq
                } else {
                    Op::Par
                };
                let mut acc = ch[0].fold(unit, atom, op);
                for c in &ch[1..] {
                    let v = c.fold(unit, atom, op);
                    acc = op(kind, &acc, &v);
                }
                acc
            }
        }
    }
}

/// Depth of the balanced binarization over `children` (at least two).
pub(crate) fn balanced_depth(children: &[Pomset]) -> usize {
    match children.len() {
        0 => 0,
        1 => children[0].depth(),
        n => {
            let (l, r) = children.split_at(n / 2);
            1 + balanced_depth(l).max(balanced_depth(r))
        }
    }
}

impl fmt::Debug for Pomset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pomset({self})")
    }
}

/// Prints in term syntax with minimal parentheses; parsing the output yields
/// the same pomset.
impl fmt::Display for Pomset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pomset::Empty => f.write_str(EPSILON_KEYWORD),
            Pomset::Atom(a) => write!(f, "{a}"),
            Pomset::Seq(ch) => {
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    if matches!(c, Pomset::Par(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Pomset::Par(ch) => {
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" || ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Pomset {
        Pomset::letter(Letter::new(s).unwrap())
    }

    #[test]
    fn letter_validation() {
        assert!(Letter::new("a").is_ok());
        assert!(Letter::new("req_1").is_ok());
        assert_eq!(
            Letter::new("eps"),
            Err(AlphabetError::Reserved("eps".into()))
        );
        assert!(Letter::new("A").is_err());
        assert!(Letter::new("1a").is_err());
        assert!(Letter::new("").is_err());
        assert!(Letter::new("_").is_err());
    }

    #[test]
    fn alphabet_rules() {
        assert_eq!(Alphabet::from_symbols(""), Err(AlphabetError::Empty));
        assert_eq!(
            Alphabet::from_symbols("a b a"),
            Err(AlphabetError::Duplicate("a".into()))
        );
        let sigma = Alphabet::from_symbols("c a b").unwrap();
        let order: Vec<_> = sigma.letters().iter().map(Letter::as_str).collect();
        assert_eq!(order, ["c", "a", "b"]);
        assert_eq!(Alphabet::standard(3).unwrap().to_string(), "a b c");
    }

    #[test]
    fn empty_is_neutral() {
        let u = l("a").seq(&l("b"));
        assert_eq!(u.par(&Pomset::Empty), u);
        assert_eq!(Pomset::Empty.seq(&u), u);
        assert_eq!(Pomset::Empty.par(&Pomset::Empty), Pomset::Empty);
    }

    #[test]
    fn flattening_and_sorting() {
        let (a, b) = (l("a"), l("b"));
        assert_eq!(a.par(&b.par(&a)), a.par(&a).par(&b));
        assert_eq!(a.seq(&b).seq(&a), a.seq(&b.seq(&a)));
        assert_ne!(a.seq(&b), b.seq(&a));
        match a.par(&b).par(&a) {
            Pomset::Par(ch) => assert_eq!(ch.len(), 3),
            other => panic!("expected par node, got {other}"),
        }
    }

    #[test]
    fn depth_and_size() {
        let bc_a = l("b").seq(&l("c")).par(&l("a"));
        assert_eq!(bc_a.depth(), 2);
        assert_eq!(bc_a.size(), 3);
        let chain = Pomset::seq_all((0..8).map(|_| l("a")));
        assert_eq!(chain.depth(), 3);
        assert_eq!(Pomset::Empty.depth(), 0);
        assert_eq!(Pomset::Empty.size(), 0);
    }

    #[test]
    fn display_uses_minimal_parentheses() {
        let p = Pomset::seq_all([l("a"), l("b").par(&l("b")), l("c")]);
        assert_eq!(p.to_string(), "a (b || b) c");
        assert_eq!(l("a").par(&l("b").seq(&l("c"))).to_string(), "b c || a");
        assert_eq!(Pomset::Empty.to_string(), "eps");
    }
}
