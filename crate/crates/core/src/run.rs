//! One learning run against a known target, reduced to a CSV-ready record.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::learner::{Auditor, CeStrategy, LearnError, LearnOutcome, Learner, LearnerConfig};
use crate::recognizer::PomsetRecognizer;
use crate::teacher::{EquivalenceStrategy, Teacher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunResult {
    Ok,
    /// A test-suite teacher accepted an inequivalent hypothesis whose
    /// target had more than `k` extra states.
    BoundViolation,
    Error,
}

impl fmt::Display for RunResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunResult::Ok => "ok",
            RunResult::BoundViolation => "bound_violation",
            RunResult::Error => "error",
        })
    }
}

/// One CSV row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub target_states: usize,
    pub alphabet_size: usize,
    pub ce_strategy: String,
    pub equiv_strategy: String,
    pub membership_total: u64,
    pub membership_unique: u64,
    pub symbols_total: u64,
    pub equivalence_total: u64,
    pub learned_states: usize,
    pub result: RunResult,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub run_id: String,
    pub seed: u64,
    pub ce_strategy: CeStrategy,
    pub equivalence: EquivalenceStrategy,
    pub audit: bool,
    pub trace: bool,
    pub max_rounds: Option<usize>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            run_id: "run".into(),
            seed: 0,
            ce_strategy: CeStrategy::FindEbp,
            equivalence: EquivalenceStrategy::Exact,
            audit: false,
            trace: false,
            max_rounds: None,
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub record: RunRecord,
    pub outcome: Result<LearnOutcome, LearnError>,
    /// Product check of the learned hypothesis against the target.
    pub equivalent: Option<bool>,
}

/// Learns `target` and rechecks the result with the product construction.
pub fn run_learning(target: &PomsetRecognizer, spec: &RunSpec) -> RunReport {
    let start = Instant::now();
    let mut teacher = Teacher::new(target.clone(), spec.equivalence);
    let config = LearnerConfig {
        ce_strategy: spec.ce_strategy,
        max_rounds: spec.max_rounds,
        trace: spec.trace,
    };
    let mut learner = Learner::new(&mut teacher, config);
    if spec.audit {
        learner = learner.with_auditor(Auditor::new(target.clone()));
    }
    let outcome = learner.run();
    let stats = teacher.stats();
    let (result, equivalent, learned) = match &outcome {
        Ok(out) => {
            let eq = out
                .hypothesis
                .equivalent(target)
                .map(|e| e.is_equivalent())
                .unwrap_or(false);
            let result = if eq {
                RunResult::Ok
            } else {
                match spec.equivalence {
                    EquivalenceStrategy::TestSuite { k, .. }
                        if target.minimize().num_states() > out.hypothesis.num_states() + k =>
                    {
                        RunResult::BoundViolation
                    }
                    _ => RunResult::Error,
                }
            };
            (result, Some(eq), out.hypothesis.num_states())
        }
        Err(_) => (RunResult::Error, None, 0),
    };
    let record = RunRecord {
        run_id: spec.run_id.clone(),
        seed: spec.seed,
        target_states: target.num_states(),
        alphabet_size: target.alphabet().len(),
        ce_strategy: spec.ce_strategy.to_string(),
        equiv_strategy: spec.equivalence.to_string(),
        membership_total: stats.membership_total,
        membership_unique: stats.membership_unique,
        symbols_total: stats.symbols_total,
        equivalence_total: stats.equivalence_total,
        learned_states: learned,
        result,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    RunReport {
        record,
        outcome,
        equivalent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bc_par_a;

    #[test]
    fn bc_par_a_run_is_ok() {
        let spec = RunSpec {
            audit: true,
            ..RunSpec::default()
        };
        let report = run_learning(&bc_par_a(), &spec);
        assert_eq!(report.record.result, RunResult::Ok);
        assert_eq!(report.record.learned_states, 6);
        assert_eq!(report.record.target_states, 6);
        assert_eq!(report.equivalent, Some(true));
        assert!(report.record.membership_unique <= report.record.membership_total);
    }

    #[test]
    fn too_few_rounds_is_an_error() {
        let spec = RunSpec {
            max_rounds: Some(0),
            ..RunSpec::default()
        };
        let report = run_learning(&bc_par_a(), &spec);
        assert_eq!(report.record.result, RunResult::Error);
        assert!(matches!(report.outcome, Err(LearnError::TooManyRounds(0))));
    }
}
