//! Finite bimonoid pomset recognizers.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::context::{Context, Side};
use crate::pomset::{Alphabet, Atom, Letter, Op, Pomset};
use crate::term::Term;

/// Index of a state; dense in `0..num_states()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// First broken bimonoid law found by [`PomsetRecognizer::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LawViolation {
    #[error("unit is not neutral for {op} on state {x}")]
    Neutrality { op: Op, x: String },
    #[error("parallel composition is not commutative on ({x}, {y})")]
    Commutativity { x: String, y: String },
    #[error("{op} is not associative on ({x}, {y}, {z})")]
    Associativity {
        op: Op,
        x: String,
        y: String,
        z: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecognizerError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("law violation: {0}")]
    Law(#[from] LawViolation),
    #[error("malformed recognizer: {0}")]
    Malformed(String),
    #[error("letter `{0}` is not in the alphabet")]
    UnknownLetter(String),
    #[error("cannot evaluate a pomset containing holes")]
    Hole,
    #[error("alphabets differ: {0} vs {1}")]
    AlphabetMismatch(String, String),
}

/// A finite bimonoid with a letter interpretation and accepting states.
#[derive(Clone, PartialEq, Eq)]
pub struct PomsetRecognizer {
    pub(crate) alphabet: Alphabet,
    pub(crate) names: Vec<String>,
    pub(crate) unit: usize,
    pub(crate) seq: Vec<usize>,
    pub(crate) par: Vec<usize>,
    pub(crate) letters: Vec<usize>,
    pub(crate) accepting: Vec<bool>,
}

/// Outcome of an equivalence check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    CounterExample(Pomset),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// A term whose nodes carry the states they evaluate to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluationTree {
    Leaf {
        state: StateId,
    },
    Inner {
        op: Op,
        state: StateId,
        left: Box<EvaluationTree>,
        right: Box<EvaluationTree>,
    },
}

impl EvaluationTree {
    pub fn state(&self) -> StateId {
        match self {
            EvaluationTree::Leaf { state } | EvaluationTree::Inner { state, .. } => *state,
        }
    }
}

fn valid_state_name(s: &str) -> bool {
    !s.is_empty() && s != "default" && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PomsetRecognizer {
    /// Builds a recognizer from explicit tables (row-major, `n * n`) and
    /// checks the bimonoid laws.
    pub fn new(
        alphabet: Alphabet,
        names: Vec<String>,
        unit: usize,
        seq: Vec<usize>,
        par: Vec<usize>,
        letters: Vec<usize>,
        accepting: Vec<bool>,
    ) -> Result<Self, RecognizerError> {
        let r = Self::from_raw(alphabet, names, unit, seq, par, letters, accepting)?;
        r.validate()?;
        Ok(r)
    }

    /// Like [`PomsetRecognizer::new`] but only checks shapes, not laws.
    pub fn from_raw(
        alphabet: Alphabet,
        names: Vec<String>,
        unit: usize,
        seq: Vec<usize>,
        par: Vec<usize>,
        letters: Vec<usize>,
        accepting: Vec<bool>,
    ) -> Result<Self, RecognizerError> {
        let n = names.len();
        let bad = |m: &str| Err(RecognizerError::Malformed(m.to_string()));
        if n == 0 {
            return bad("no states");
        }
        if unit >= n {
            return bad("unit out of range");
        }
        if seq.len() != n * n || par.len() != n * n {
            return bad("table size does not match state count");
        }
        if letters.len() != alphabet.len() {
            return bad("letter map does not cover the alphabet");
        }
        if accepting.len() != n {
            return bad("accepting vector has wrong length");
        }
        if seq.iter().chain(&par).chain(&letters).any(|&x| x >= n) {
            return bad("state index out of range");
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !valid_state_name(name) {
                return bad(&format!("invalid state name `{name}`"));
            }
            if !seen.insert(name.as_str()) {
                return bad(&format!("duplicate state name `{name}`"));
            }
        }
        Ok(PomsetRecognizer {
            alphabet,
            names,
            unit,
            seq,
            par,
            letters,
            accepting,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s.0]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name).map(StateId)
    }

    pub fn unit(&self) -> StateId {
        StateId(self.unit)
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.accepting[s.0]
    }

    pub fn accepting_states(&self) -> Vec<StateId> {
        self.states().filter(|&s| self.is_accepting(s)).collect()
    }

    pub fn letter_state(&self, l: &Letter) -> Option<StateId> {
        self.alphabet.position(l).map(|i| StateId(self.letters[i]))
    }

    pub fn seq(&self, x: StateId, y: StateId) -> StateId {
        StateId(self.seq[x.0 * self.num_states() + y.0])
    }

    pub fn par(&self, x: StateId, y: StateId) -> StateId {
        StateId(self.par[x.0 * self.num_states() + y.0])
    }

    pub fn apply(&self, op: Op, x: StateId, y: StateId) -> StateId {
        match op {
            Op::Seq => self.seq(x, y),
            Op::Par => self.par(x, y),
        }
    }

    #[inline]
    fn op_idx(&self, op: Op, x: usize, y: usize) -> usize {
        let n = self.names.len();
        match op {
            Op::Seq => self.seq[x * n + y],
            Op::Par => self.par[x * n + y],
        }
    }

    /// Same recognizer with a different accepting set.
    pub fn with_accepting(&self, accepting: Vec<bool>) -> Result<Self, RecognizerError> {
        if accepting.len() != self.num_states() {
            return Err(RecognizerError::Malformed(
                "accepting vector has wrong length".into(),
            ));
        }
        let mut r = self.clone();
        r.accepting = accepting;
        Ok(r)
    }

    /// Checks neutrality, commutativity of `par` and associativity of both
    /// tables, returning the first violation.
    pub fn validate(&self) -> Result<(), LawViolation> {
        let n = self.num_states();
        let name = |i: usize| self.names[i].clone();
        for op in Op::ALL {
            for x in 0..n {
                if self.op_idx(op, x, self.unit) != x || self.op_idx(op, self.unit, x) != x {
                    return Err(LawViolation::Neutrality { op, x: name(x) });
                }
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                if self.par[x * n + y] != self.par[y * n + x] {
                    return Err(LawViolation::Commutativity {
                        x: name(x),
                        y: name(y),
                    });
                }
            }
        }
        for op in Op::ALL {
            let t = match op {
                Op::Seq => &self.seq,
                Op::Par => &self.par,
            };
            for x in 0..n {
                let row = &t[x * n..x * n + n];
                for y in 0..n {
                    let xy = row[y];
                    let yrow = &t[y * n..y * n + n];
                    let xyrow = &t[xy * n..xy * n + n];
                    for z in 0..n {
                        if xyrow[z] != row[yrow[z]] {
                            return Err(LawViolation::Associativity {
                                op,
                                x: name(x),
                                y: name(y),
                                z: name(z),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Homomorphic image of `w`.
    pub fn eval(&self, w: &Pomset) -> Result<StateId, RecognizerError> {
        self.eval_idx(w).map(StateId)
    }

    fn eval_idx(&self, w: &Pomset) -> Result<usize, RecognizerError> {
        match w {
            Pomset::Empty => Ok(self.unit),
            Pomset::Atom(Atom::Letter(l)) => self
                .alphabet
                .position(l)
                .map(|i| self.letters[i])
                .ok_or_else(|| RecognizerError::UnknownLetter(l.to_string())),
            Pomset::Atom(Atom::Hole(_)) => Err(RecognizerError::Hole),
            Pomset::Seq(ch) | Pomset::Par(ch) => {
                let op = if matches!(w, Pomset::Seq(_)) {
                    Op::Seq
                } else {
                    Op::Par
                };
                let mut acc = self.eval_idx(&ch[0])?;
                for c in &ch[1..] {
                    let v = self.eval_idx(c)?;
                    acc = self.op_idx(op, acc, v);
                }
                Ok(acc)
            }
        }
    }

    pub fn accepts(&self, w: &Pomset) -> Result<bool, RecognizerError> {
        Ok(self.accepting[self.eval_idx(w)?])
    }

    /// Evaluates a term node by node.
    pub fn evaluation_tree(&self, t: &Term) -> Result<EvaluationTree, RecognizerError> {
        match t {
            Term::Epsilon => Ok(EvaluationTree::Leaf { state: self.unit() }),
            Term::Leaf(Atom::Letter(l)) => Ok(EvaluationTree::Leaf {
                state: self
                    .letter_state(l)
                    .ok_or_else(|| RecognizerError::UnknownLetter(l.to_string()))?,
            }),
            Term::Leaf(Atom::Hole(_)) => Err(RecognizerError::Hole),
            Term::Inner(op, l, r) => {
                let left = self.evaluation_tree(l)?;
                let right = self.evaluation_tree(r)?;
                Ok(EvaluationTree::Inner {
                    op: *op,
                    state: self.apply(*op, left.state(), right.state()),
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }

    fn letter_pomsets(&self) -> Vec<(Pomset, usize)> {
        self.alphabet
            .letters()
            .iter()
            .zip(&self.letters)
            .map(|(l, &s)| (Pomset::letter(l.clone()), s))
            .collect()
    }

    /// Reachable states with a witness pomset each: smallest size first,
    /// ties broken by the canonical order among the candidates found.
    pub fn reachable(&self) -> BTreeMap<StateId, Pomset> {
        let found = closure(
            self.unit,
            &self.letter_pomsets(),
            |op, x, y| self.op_idx(op, x, y),
            |_, _| true,
        );
        found.into_iter().map(|(s, w)| (StateId(s), w)).collect()
    }

    /// Witness table indexed by state (`None` for unreachable states).
    fn witness_vec(&self) -> Vec<Option<Pomset>> {
        let mut out = vec![None; self.num_states()];
        for (s, w) in self.reachable() {
            out[s.0] = Some(w);
        }
        out
    }

    /// All distinguishable unordered pairs `(x, y)` with `x < y`, each with a
    /// context `c` such that exactly one of `c[x]`, `c[y]` is accepting.
    pub fn distinguishable_pairs(&self) -> BTreeMap<(StateId, StateId), Context> {
        let n = self.num_states();
        let witnesses = self.witness_vec();
        // pre[k][m][x]: states y with y∘m = x (k = 0: seq, hole left;
        // k = 1: seq, hole right; k = 2: par).
        let mut pre = vec![vec![vec![Vec::new(); n]; n]; 3];
        for m in 0..n {
            if witnesses[m].is_none() {
                continue;
            }
            for y in 0..n {
                pre[0][m][self.seq[y * n + m]].push(y);
                pre[1][m][self.seq[m * n + y]].push(y);
                pre[2][m][self.par[y * n + m]].push(y);
            }
        }
        let mut dist: Vec<Option<Context>> = vec![None; n * n];
        let mut queue = VecDeque::new();
        for x in 0..n {
            for y in x + 1..n {
                if self.accepting[x] != self.accepting[y] {
                    dist[x * n + y] = Some(Context::hole());
                    queue.push_back((x, y));
                }
            }
        }
        let kinds = [
            (Op::Seq, Side::Left),
            (Op::Seq, Side::Right),
            (Op::Par, Side::Left),
        ];
        while let Some((x, y)) = queue.pop_front() {
            let c = dist[x * n + y]
                .clone()
                .expect("queued pairs are distinguished");
            for (k, &(op, side)) in kinds.iter().enumerate() {
                for m in 0..n {
                    let Some(wm) = &witnesses[m] else { continue };
                    for &a in &pre[k][m][x] {
                        for &b in &pre[k][m][y] {
                            if a == b {
                                continue;
                            }
                            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                            if dist[lo * n + hi].is_none() {
                                dist[lo * n + hi] = Some(c.wrap(op, side, wm));
                                queue.push_back((lo, hi));
                            }
                        }
                    }
                }
            }
        }
        let mut out = BTreeMap::new();
        for x in 0..n {
            for y in x + 1..n {
                if let Some(c) = dist[x * n + y].take() {
                    out.insert((StateId(x), StateId(y)), c);
                }
            }
        }
        out
    }

    /// Coarsest congruence on `states` refining acceptance, using only the
    /// given states as multipliers. Returns a block id per entry of `states`.
    fn congruence_blocks(&self, states: &[usize]) -> Vec<usize> {
        let n = self.num_states();
        let mut pos = vec![usize::MAX; n];
        for (i, &s) in states.iter().enumerate() {
            pos[s] = i;
        }
        let mut block: Vec<usize> = states.iter().map(|&s| self.accepting[s] as usize).collect();
        // Renumber by first occurrence.
        let mut count = renumber(&mut block);
        loop {
            let mut sigs: HashMap<Vec<usize>, usize> = HashMap::new();
            let mut next = Vec::with_capacity(states.len());
            for &x in states {
                let mut sig = Vec::with_capacity(1 + 3 * states.len());
                sig.push(block[pos[x]]);
                for &m in states {
                    sig.push(block[pos[self.seq[x * n + m]]]);
                    sig.push(block[pos[self.seq[m * n + x]]]);
                    sig.push(block[pos[self.par[x * n + m]]]);
                }
                let fresh = sigs.len();
                next.push(*sigs.entry(sig).or_insert(fresh));
            }
            let new_count = sigs.len();
            block = next;
            if new_count == count {
                return block;
            }
            count = new_count;
        }
    }

    /// Reachable and no two states are language-equivalent.
    pub fn is_minimal(&self) -> bool {
        let reach = self.reachable();
        if reach.len() != self.num_states() {
            return false;
        }
        let states: Vec<usize> = (0..self.num_states()).collect();
        let blocks = self.congruence_blocks(&states);
        blocks.iter().max().map_or(0, |m| m + 1) == self.num_states()
    }

    /// Restricts to reachable states and quotients by indistinguishability.
    /// States of the result are ordered by their least original member.
    pub fn minimize(&self) -> PomsetRecognizer {
        let n = self.num_states();
        let reach: Vec<usize> = self.reachable().keys().map(|s| s.0).collect();
        let blocks = self.congruence_blocks(&reach);
        let k = blocks.iter().max().map_or(0, |m| m + 1);
        let mut of = vec![usize::MAX; n];
        let mut rep = vec![usize::MAX; k];
        for (i, &s) in reach.iter().enumerate() {
            of[s] = blocks[i];
            if rep[blocks[i]] == usize::MAX {
                rep[blocks[i]] = s;
            }
        }
        let mut seq = Vec::with_capacity(k * k);
        let mut par = Vec::with_capacity(k * k);
        for &a in &rep {
            for &b in &rep {
                seq.push(of[self.seq[a * n + b]]);
                par.push(of[self.par[a * n + b]]);
            }
        }
        PomsetRecognizer {
            alphabet: self.alphabet.clone(),
            names: rep.iter().map(|&s| self.names[s].clone()).collect(),
            unit: of[self.unit],
            seq,
            par,
            letters: self.letters.iter().map(|&s| of[s]).collect(),
            accepting: rep.iter().map(|&s| self.accepting[s]).collect(),
        }
    }

    /// Decides `L(self) = L(other)` by a product closure; a counter-example
    /// is accepted by exactly one of the two.
    pub fn equivalent(&self, other: &PomsetRecognizer) -> Result<Equivalence, RecognizerError> {
        let map = letter_correspondence(&self.alphabet, &other.alphabet)?;
        let letters: Vec<(Pomset, (usize, usize))> = self
            .alphabet
            .letters()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                (
                    Pomset::letter(l.clone()),
                    (self.letters[i], other.letters[map[i]]),
                )
            })
            .collect();
        let mut bad = None;
        closure(
            (self.unit, other.unit),
            &letters,
            |op, (a1, b1), (a2, b2)| (self.op_idx(op, a1, a2), other.op_idx(op, b1, b2)),
            |(a, b), w| {
                if self.accepting[a] != other.accepting[b] {
                    bad = Some(w.clone());
                    false
                } else {
                    true
                }
            },
        );
        Ok(match bad {
            Some(w) => Equivalence::CounterExample(w),
            None => Equivalence::Equivalent,
        })
    }

    /// Serializes to the line-based recognizer format.
    pub fn to_file_string(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, RecognizerError> {
        parse_recognizer(text)
    }
}

fn renumber(block: &mut [usize]) -> usize {
    let mut map = HashMap::new();
    for b in block.iter_mut() {
        let fresh = map.len();
        *b = *map.entry(*b).or_insert(fresh);
    }
    map.len()
}

/// For each letter of `a`, its index in `b`.
fn letter_correspondence(a: &Alphabet, b: &Alphabet) -> Result<Vec<usize>, RecognizerError> {
    let mismatch = || RecognizerError::AlphabetMismatch(a.to_string(), b.to_string());
    if a.len() != b.len() {
        return Err(mismatch());
    }
    a.letters()
        .iter()
        .map(|l| b.position(l).ok_or_else(mismatch))
        .collect()
}

/// Size-layered forward closure from the unit and the letters under both
/// operations. Each newly found key is reported to `visit` in order of
/// (witness size, witness); returning `false` stops the search.
fn closure<K: Copy + Eq + Hash>(
    unit: K,
    letters: &[(Pomset, K)],
    combine: impl Fn(Op, K, K) -> K,
    mut visit: impl FnMut(K, &Pomset) -> bool,
) -> Vec<(K, Pomset)> {
    let mut found: HashMap<K, usize> = HashMap::new();
    let mut order: Vec<(K, Pomset)> = Vec::new();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];

    found.insert(unit, 0);
    order.push((unit, Pomset::Empty));
    buckets[0].push(0);
    if !visit(unit, &Pomset::Empty) {
        return order;
    }
    let mut sorted_letters: Vec<&(Pomset, K)> = letters.iter().collect();
    sorted_letters.sort_by(|a, b| a.0.cmp(&b.0));
    for (w, k) in sorted_letters {
        if found.contains_key(k) {
            continue;
        }
        found.insert(*k, order.len());
        buckets[1].push(order.len());
        order.push((*k, w.clone()));
        if !visit(*k, w) {
            return order;
        }
    }
    let mut max_size = if buckets[1].is_empty() { 0 } else { 1 };
    let mut s = 2;
    while s <= 2 * max_size {
        let mut cands: HashMap<K, Pomset> = HashMap::new();
        for a in 1..s {
            let b = s - a;
            if a >= buckets.len() || b >= buckets.len() {
                continue;
            }
            for &i in &buckets[a] {
                for &j in &buckets[b] {
                    let (ki, wi) = &order[i];
                    let (kj, wj) = &order[j];
                    for op in Op::ALL {
                        if op == Op::Par && a > b {
                            continue;
                        }
                        let k = combine(op, *ki, *kj);
                        if found.contains_key(&k) {
                            continue;
                        }
                        let w = op.apply(wi, wj);
                        match cands.get_mut(&k) {
                            Some(old) if *old <= w => {}
                            Some(old) => *old = w,
                            None => {
                                cands.insert(k, w);
                            }
                        }
                    }
                }
            }
        }
        let mut fresh: Vec<(K, Pomset)> = cands.into_iter().collect();
        fresh.sort_by(|x, y| x.1.cmp(&y.1));
        if !fresh.is_empty() {
            max_size = s;
            while buckets.len() <= s {
                buckets.push(Vec::new());
            }
        }
        for (k, w) in fresh {
            found.insert(k, order.len());
            buckets[s].push(order.len());
            let stop = !visit(k, &w);
            order.push((k, w));
            if stop {
                return order;
            }
        }
        s += 1;
    }
    order
}

// ---------------------------------------------------------------------------
// File format

impl fmt::Display for PomsetRecognizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.num_states();
        writeln!(f, "alphabet: {}", self.alphabet)?;
        writeln!(f, "states: {}", self.names.join(" "))?;
        writeln!(f, "unit: {}", self.names[self.unit])?;
        let letters: Vec<String> = self
            .alphabet
            .letters()
            .iter()
            .zip(&self.letters)
            .map(|(l, &s)| format!("{l} -> {}", self.names[s]))
            .collect();
        writeln!(f, "letters: {}", letters.join("   "))?;
        let acc: Vec<&str> = (0..n)
            .filter(|&s| self.accepting[s])
            .map(|s| self.names[s].as_str())
            .collect();
        if acc.is_empty() {
            writeln!(f, "accepting:")?;
        } else {
            writeln!(f, "accepting: {}", acc.join(" "))?;
        }
        for op in Op::ALL {
            writeln!(f, "{}:", if op == Op::Seq { "seq" } else { "par" })?;
            let pairs: Vec<(usize, usize)> = (0..n)
                .filter(|&x| x != self.unit)
                .flat_map(|x| (0..n).map(move |y| (x, y)))
                .filter(|&(x, y)| y != self.unit && (op == Op::Seq || x <= y))
                .collect();
            let mut freq = vec![0usize; n];
            for &(x, y) in &pairs {
                freq[self.op_idx(op, x, y)] += 1;
            }
            let default = (0..n).max_by_key(|&s| (freq[s], std::cmp::Reverse(s)));
            for &(x, y) in &pairs {
                let z = self.op_idx(op, x, y);
                if Some(z) != default {
                    writeln!(
                        f,
                        "  {} {} -> {}",
                        self.names[x], self.names[y], self.names[z]
                    )?;
                }
            }
            if let Some(d) = default.filter(|&d| freq[d] > 0) {
                writeln!(f, "  default -> {}", self.names[d])?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PomsetRecognizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PomsetRecognizer({} states over {})",
            self.num_states(),
            self.alphabet
        )
    }
}

#[derive(Default)]
struct TableSpec {
    entries: Vec<(usize, String, String, String)>,
    default: Option<(usize, String)>,
}

/// Parses the line-based recognizer format and validates the result.
pub fn parse_recognizer(text: &str) -> Result<PomsetRecognizer, RecognizerError> {
    let err = |line: usize, message: String| RecognizerError::Format { line, message };
    let mut alphabet: Option<Alphabet> = None;
    let mut states: Option<Vec<String>> = None;
    let mut unit: Option<(usize, String)> = None;
    let mut letters: Option<(usize, Vec<String>)> = None;
    let mut accepting: Option<(usize, Vec<String>)> = None;
    let mut tables = [TableSpec::default(), TableSpec::default()];
    let mut section: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, rest)) = line.split_once(':') {
            let key = key.trim();
            let rest = rest.trim();
            let once = |present: bool| {
                if present {
                    Err(err(lineno, format!("duplicate `{key}` line")))
                } else {
                    Ok(())
                }
            };
            section = None;
            match key {
                "alphabet" => {
                    once(alphabet.is_some())?;
                    alphabet =
                        Some(Alphabet::from_symbols(rest).map_err(|e| err(lineno, e.to_string()))?);
                }
                "states" => {
                    once(states.is_some())?;
                    states = Some(rest.split_whitespace().map(str::to_string).collect());
                }
                "unit" => {
                    once(unit.is_some())?;
                    let toks: Vec<&str> = rest.split_whitespace().collect();
                    if toks.len() != 1 {
                        return Err(err(lineno, "expected exactly one unit state".into()));
                    }
                    unit = Some((lineno, toks[0].to_string()));
                }
                "letters" => {
                    once(letters.is_some())?;
                    letters = Some((
                        lineno,
                        rest.split_whitespace().map(str::to_string).collect(),
                    ));
                }
                "accepting" => {
                    once(accepting.is_some())?;
                    accepting = Some((
                        lineno,
                        rest.split_whitespace().map(str::to_string).collect(),
                    ));
                }
                "seq" | "par" => {
                    let idx = (key == "par") as usize;
                    if !rest.is_empty() {
                        return Err(err(
                            lineno,
                            format!("entries go on the lines after `{key}:`"),
                        ));
                    }
                    if !tables[idx].entries.is_empty() || tables[idx].default.is_some() {
                        return Err(err(lineno, format!("duplicate `{key}` section")));
                    }
                    section = Some(idx);
                }
                other => return Err(err(lineno, format!("unknown key `{other}`"))),
            }
            continue;
        }
        let Some(idx) = section else {
            return Err(err(lineno, format!("unexpected line `{line}`")));
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["default", "->", z] => {
                if tables[idx].default.is_some() {
                    return Err(err(lineno, "duplicate default".into()));
                }
                tables[idx].default = Some((lineno, z.to_string()));
            }
            [x, y, "->", z] => {
                tables[idx]
                    .entries
                    .push((lineno, x.to_string(), y.to_string(), z.to_string()));
            }
            _ => {
                return Err(err(
                    lineno,
                    format!("expected `x y -> z` or `default -> z`, got `{line}`"),
                ))
            }
        }
    }

    let alphabet = alphabet.ok_or_else(|| err(0, "missing `alphabet:` line".into()))?;
    let names = states.ok_or_else(|| err(0, "missing `states:` line".into()))?;
    let n = names.len();
    if n == 0 {
        return Err(err(0, "no states declared".into()));
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    if index.len() != n {
        return Err(err(0, "duplicate state name".into()));
    }
    let lookup = |line: usize, s: &str| {
        index
            .get(s)
            .copied()
            .ok_or_else(|| err(line, format!("unknown state `{s}`")))
    };
    let (uline, uname) = unit.ok_or_else(|| err(0, "missing `unit:` line".into()))?;
    let u = lookup(uline, &uname)?;

    let (lline, ltoks) = letters.ok_or_else(|| err(0, "missing `letters:` line".into()))?;
    if ltoks.len() % 3 != 0 {
        return Err(err(lline, "expected `letter -> state` triples".into()));
    }
    let mut letter_map = vec![usize::MAX; alphabet.len()];
    for chunk in ltoks.chunks(3) {
        if chunk[1] != "->" {
            return Err(err(lline, format!("expected `->` after `{}`", chunk[0])));
        }
        let pos = alphabet
            .get(&chunk[0])
            .and_then(|l| alphabet.position(l))
            .ok_or_else(|| {
                err(
                    lline,
                    format!("letter `{}` is not in the alphabet", chunk[0]),
                )
            })?;
        if letter_map[pos] != usize::MAX {
            return Err(err(lline, format!("letter `{}` mapped twice", chunk[0])));
        }
        letter_map[pos] = lookup(lline, &chunk[2])?;
    }
    if let Some(pos) = letter_map.iter().position(|&s| s == usize::MAX) {
        return Err(err(
            lline,
            format!("letter `{}` is not mapped", alphabet.letters()[pos]),
        ));
    }

    let mut acc = vec![false; n];
    if let Some((aline, toks)) = accepting {
        for t in toks {
            acc[lookup(aline, &t)?] = true;
        }
    } else {
        return Err(err(0, "missing `accepting:` line".into()));
    }

    let mut built = Vec::new();
    for (idx, spec) in tables.iter().enumerate() {
        let op_name = if idx == 0 { "seq" } else { "par" };
        let mut t = vec![usize::MAX; n * n];
        for x in 0..n {
            t[x * n + u] = x;
            t[u * n + x] = x;
        }
        let set = |line: usize, x: usize, y: usize, z: usize, t: &mut Vec<usize>| {
            let cur = t[x * n + y];
            if x == u || y == u {
                if cur != z {
                    return Err(err(line, format!("{op_name} entry overrides the unit")));
                }
                return Ok(());
            }
            if cur != usize::MAX && cur != z {
                return Err(err(
                    line,
                    format!(
                        "conflicting {op_name} entries for ({}, {})",
                        names[x], names[y]
                    ),
                ));
            }
            t[x * n + y] = z;
            Ok(())
        };
        for (line, x, y, z) in &spec.entries {
            let (x, y, z) = (lookup(*line, x)?, lookup(*line, y)?, lookup(*line, z)?);
            set(*line, x, y, z, &mut t)?;
            if idx == 1 {
                set(*line, y, x, z, &mut t)?;
            }
        }
        let default = match &spec.default {
            Some((line, z)) => Some(lookup(*line, z)?),
            None => None,
        };
        for x in 0..n {
            for y in 0..n {
                if t[x * n + y] == usize::MAX {
                    match default {
                        Some(d) => t[x * n + y] = d,
                        None => {
                            return Err(err(
                                0,
                                format!(
                                    "{op_name} has no entry for ({}, {}) and no default",
                                    names[x], names[y]
                                ),
                            ))
                        }
                    }
                }
            }
        }
        built.push(t);
    }
    let par = built.pop().unwrap();
    let seq = built.pop().unwrap();
    PomsetRecognizer::new(alphabet, names, u, seq, par, letter_map, acc)
}
