//! Active learning of pomset recognizers.
//!
//! Series-parallel pomsets and their terms live in [`pomset`], [`term`] and
//! [`context`]; finite bimonoid recognizers in [`recognizer`]. The learner
//! talks to a simulated teacher ([`teacher`]) and can use a finite test
//! suite ([`wmethod`]) in place of exact equivalence checks.

pub mod benchgen;
pub mod context;
pub mod fixtures;
pub mod learner;
pub mod pomset;
pub mod recognizer;
pub mod run;
pub mod teacher;
pub mod term;
pub mod wmethod;

pub use context::{Context, ContextError, MultiContext, Side, Split};
pub use learner::{
    learn, Auditor, CeStrategy, Diagnostics, EbpRecord, Hypothesis, LearnError, LearnOutcome,
    Learner, LearnerConfig, TraceEvent, Violation, ViolationKind,
};
pub use pomset::{Alphabet, AlphabetError, Atom, Letter, Op, Pomset};
pub use recognizer::{
    parse_recognizer, Equivalence, EvaluationTree, LawViolation, PomsetRecognizer, RecognizerError,
    StateId,
};
pub use teacher::{EquivalenceStrategy, QueryStats, Teacher, TeacherError};
pub use term::{
    canonical_term, canonicalize, format_term, parse_pomset, parse_term, subpomsets, Decomposition,
    ParseError, Term,
};
pub use wmethod::{
    characterization_set, lcov, lcov_levels, run_suite, state_cover, test_suite,
    CharacterizationSet, StateCover, SuiteError, SuiteVerdict, TestSuite,
};
