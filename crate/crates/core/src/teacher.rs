//! Simulated minimally adequate teacher over a hidden target recognizer.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::pomset::{Alphabet, Pomset};
use crate::recognizer::{Equivalence, PomsetRecognizer, RecognizerError};
use crate::wmethod::{run_suite, suite_for, SuiteError, SuiteVerdict, DEFAULT_CAP};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QueryStats {
    pub membership_total: u64,
    pub membership_unique: u64,
    /// Sum of `size(w)` over membership queries that missed the cache.
    pub symbols_total: u64,
    pub equivalence_total: u64,
}

/// How equivalence queries are answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceStrategy {
    /// Product check against the target.
    Exact,
    /// Run `W[Lcov_{k+1}(P)]` built from the hypothesis through membership
    /// queries; `cap` bounds the suite size.
    TestSuite { k: usize, cap: usize },
}

impl EquivalenceStrategy {
    pub fn wmethod(k: usize) -> Self {
        EquivalenceStrategy::TestSuite {
            k,
            cap: DEFAULT_CAP,
        }
    }
}

impl fmt::Display for EquivalenceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivalenceStrategy::Exact => write!(f, "exact"),
            EquivalenceStrategy::TestSuite { k, .. } => write!(f, "wmethod:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeacherError {
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
}

impl TeacherError {
    pub fn is_budget(&self) -> bool {
        matches!(self, TeacherError::Suite(SuiteError::Budget { .. }))
    }
}

pub struct Teacher {
    target: PomsetRecognizer,
    cache: HashMap<Pomset, bool>,
    stats: QueryStats,
    strategy: EquivalenceStrategy,
}

impl Teacher {
    pub fn new(target: PomsetRecognizer, strategy: EquivalenceStrategy) -> Teacher {
        Teacher {
            target,
            cache: HashMap::new(),
            stats: QueryStats::default(),
            strategy,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.target.alphabet()
    }

    pub fn strategy(&self) -> EquivalenceStrategy {
        self.strategy
    }

    pub fn stats(&self) -> QueryStats {
        self.stats
    }

    /// Is `w` in the target language?
    pub fn membership(&mut self, w: &Pomset) -> Result<bool, TeacherError> {
        self.stats.membership_total += 1;
        if let Some(&v) = self.cache.get(w) {
            return Ok(v);
        }
        let v = self.target.accepts(w)?;
        self.stats.membership_unique += 1;
        self.stats.symbols_total += w.size() as u64;
        self.cache.insert(w.clone(), v);
        Ok(v)
    }

    /// Previously answered verdict for `w`, without counting a query.
    pub fn cached(&self, w: &Pomset) -> Option<bool> {
        self.cache.get(w).copied()
    }

    /// Does `hyp` recognize the target language? A counter-example is
    /// always accepted by exactly one of `hyp` and the target.
    pub fn equivalence(&mut self, hyp: &PomsetRecognizer) -> Result<Equivalence, TeacherError> {
        self.stats.equivalence_total += 1;
        let verdict = match self.strategy {
            EquivalenceStrategy::Exact => hyp.equivalent(&self.target)?,
            EquivalenceStrategy::TestSuite { k, cap } => {
                let (ha, ta) = (hyp.alphabet(), self.target.alphabet());
                if ha.len() != ta.len() || ha.letters().iter().any(|l| !ta.contains(l)) {
                    return Err(RecognizerError::AlphabetMismatch(
                        hyp.alphabet().to_string(),
                        self.target.alphabet().to_string(),
                    )
                    .into());
                }
                let suite = suite_for(hyp, k, cap)?;
                match run_suite(&suite, hyp, |z| self.membership(z))? {
                    SuiteVerdict::Pass => Equivalence::Equivalent,
                    SuiteVerdict::Fail(z) => Equivalence::CounterExample(z),
                }
            }
        };
        if let Equivalence::CounterExample(w) = &verdict {
            assert_ne!(
                hyp.accepts(w)?,
                self.target.accepts(w)?,
                "teacher produced a spurious counter-example"
            );
        }
        Ok(verdict)
    }
}
