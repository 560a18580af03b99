//! Finite conformance test suites `Z = W[Lcov_{k+1}(P)]`.
//!
//! Suite size grows doubly exponentially in `k`; beyond `k = 2` only
//! one- or two-state hypotheses stay under the default element cap.

use std::collections::HashSet;

use thiserror::Error;

use crate::context::Context;
use crate::pomset::{Alphabet, Op, Pomset};
use crate::recognizer::{PomsetRecognizer, RecognizerError};

/// Default cap on the number of elements of any `Lcov` level or suite.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuiteError {
    #[error("recognizer has unreachable states")]
    NotReachable,
    #[error("recognizer is not minimal")]
    NotMinimal,
    #[error("budget exceeded: {what} would exceed {cap} elements")]
    Budget { what: String, cap: usize },
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
}

/// Ordered set of access sequences; always contains `eps` first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateCover {
    elements: Vec<Pomset>,
}

impl StateCover {
    pub fn from_elements(elements: impl IntoIterator<Item = Pomset>) -> StateCover {
        let mut seen = HashSet::new();
        let mut out = vec![Pomset::Empty];
        seen.insert(Pomset::Empty);
        for e in elements {
            if seen.insert(e.clone()) {
                out.push(e);
            }
        }
        StateCover { elements: out }
    }

    pub fn elements(&self) -> &[Pomset] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Ordered set of contexts; always contains `_` first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterizationSet {
    contexts: Vec<Context>,
}

impl CharacterizationSet {
    pub fn from_contexts(contexts: impl IntoIterator<Item = Context>) -> CharacterizationSet {
        let mut seen = HashSet::new();
        let mut out = vec![Context::hole()];
        seen.insert(Context::hole());
        for c in contexts {
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        CharacterizationSet { contexts: out }
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}

fn check_minimal(r: &PomsetRecognizer) -> Result<(), SuiteError> {
    if r.reachable().len() != r.num_states() {
        return Err(SuiteError::NotReachable);
    }
    if !r.is_minimal() {
        return Err(SuiteError::NotMinimal);
    }
    Ok(())
}

/// One witness per state, in state order.
pub fn state_cover(r: &PomsetRecognizer) -> Result<StateCover, SuiteError> {
    check_minimal(r)?;
    Ok(StateCover::from_elements(r.reachable().into_values()))
}

/// `_` plus one separating context per distinguishable pair.
pub fn characterization_set(r: &PomsetRecognizer) -> Result<CharacterizationSet, SuiteError> {
    check_minimal(r)?;
    Ok(CharacterizationSet::from_contexts(
        r.distinguishable_pairs().into_values(),
    ))
}

/// `Lcov_0 .. Lcov_i` as cumulative prefixes: returns the elements of
/// `Lcov_i` in generation order together with the size of every level.
///
/// Multi-contexts may contain letters, so `Lcov_0` is the cover plus the
/// letters of `alphabet` (in that order, duplicates dropped).
pub fn lcov_levels(
    cover: &StateCover,
    alphabet: &Alphabet,
    i: usize,
    cap: usize,
) -> Result<(Vec<Pomset>, Vec<usize>), SuiteError> {
    let mut elems: Vec<Pomset> = cover.elements().to_vec();
    let mut seen: HashSet<Pomset> = elems.iter().cloned().collect();
    for l in alphabet.letters() {
        let a = Pomset::letter(l.clone());
        if seen.insert(a.clone()) {
            elems.push(a);
        }
    }
    let mut sizes = vec![elems.len()];
    if elems.len() > cap {
        return Err(SuiteError::Budget {
            what: "Lcov_0".into(),
            cap,
        });
    }
    for level in 1..=i {
        let prev = elems.len();
        for a in 0..prev {
            for b in 0..prev {
                for op in Op::ALL {
                    if op == Op::Par && b < a {
                        continue;
                    }
                    let w = op.apply(&elems[a], &elems[b]);
                    if !seen.contains(&w) {
                        if elems.len() >= cap {
                            return Err(SuiteError::Budget {
                                what: format!("Lcov_{level}"),
                                cap,
                            });
                        }
                        seen.insert(w.clone());
                        elems.push(w);
                    }
                }
            }
        }
        sizes.push(elems.len());
    }
    Ok((elems, sizes))
}

/// `Lcov_i(P)`: `P` and the letters, closed `i` times under pairwise
/// composition.
pub fn lcov(
    cover: &StateCover,
    alphabet: &Alphabet,
    i: usize,
    cap: usize,
) -> Result<Vec<Pomset>, SuiteError> {
    lcov_levels(cover, alphabet, i, cap).map(|(e, _)| e)
}

/// The suite `W[Lcov_{k+1}(P)]`, generated lazily in (context,
/// cover element) order with duplicates removed.
#[derive(Debug, Clone)]
pub struct TestSuite {
    k: usize,
    contexts: Vec<Context>,
    lcov: Vec<Pomset>,
}

/// Outcome of running a suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SuiteVerdict {
    Pass,
    Fail(Pomset),
}

impl TestSuite {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lcov(&self) -> &[Pomset] {
        &self.lcov
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    /// `|W| * |Lcov_{k+1}|`, an upper bound on the number of tests.
    pub fn bound(&self) -> usize {
        self.contexts.len() * self.lcov.len()
    }

    pub fn iter(&self) -> SuiteIter<'_> {
        SuiteIter {
            suite: self,
            ci: 0,
            li: 0,
            seen: HashSet::new(),
        }
    }

    /// Exact number of distinct tests (walks the stream once).
    pub fn count(&self) -> usize {
        self.iter().count()
    }
}

pub struct SuiteIter<'a> {
    suite: &'a TestSuite,
    ci: usize,
    li: usize,
    seen: HashSet<Pomset>,
}

impl Iterator for SuiteIter<'_> {
    type Item = Pomset;

    fn next(&mut self) -> Option<Pomset> {
        loop {
            if self.li == self.suite.lcov.len() {
                self.li = 0;
                self.ci += 1;
            }
            if self.ci >= self.suite.contexts.len() || self.suite.lcov.is_empty() {
                return None;
            }
            let w = self.suite.contexts[self.ci].fill(&self.suite.lcov[self.li]);
            self.li += 1;
            if self.seen.insert(w.clone()) {
                return Some(w);
            }
        }
    }
}

/// Builds `W[Lcov_{k+1}(P)]`; fails if `Lcov_{k+1}` or `|W| * |Lcov_{k+1}|`
/// exceeds `cap`.
pub fn test_suite(
    cover: &StateCover,
    chars: &CharacterizationSet,
    alphabet: &Alphabet,
    k: usize,
    cap: usize,
) -> Result<TestSuite, SuiteError> {
    let lcov = lcov(cover, alphabet, k + 1, cap)?;
    let suite = TestSuite {
        k,
        contexts: chars.contexts().to_vec(),
        lcov,
    };
    if suite.bound() > cap {
        return Err(SuiteError::Budget {
            what: format!("suite for k = {k}"),
            cap,
        });
    }
    Ok(suite)
}

/// Suite for a recognizer built from its own cover and characterization
/// set (minimizing first if needed).
pub fn suite_for(r: &PomsetRecognizer, k: usize, cap: usize) -> Result<TestSuite, SuiteError> {
    let m;
    let r = if r.is_minimal() {
        r
    } else {
        m = r.minimize();
        &m
    };
    test_suite(
        &state_cover(r)?,
        &characterization_set(r)?,
        r.alphabet(),
        k,
        cap,
    )
}

/// First test on which `hyp` and `oracle` disagree, in stream order.
pub fn run_suite<E>(
    suite: &TestSuite,
    hyp: &PomsetRecognizer,
    mut oracle: impl FnMut(&Pomset) -> Result<bool, E>,
) -> Result<SuiteVerdict, E>
where
    E: From<RecognizerError>,
{
    for z in suite.iter() {
        let h = hyp.accepts(&z)?;
        if h != oracle(&z)? {
            return Ok(SuiteVerdict::Fail(z));
        }
    }
    Ok(SuiteVerdict::Pass)
}
