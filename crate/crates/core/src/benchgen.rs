//! Seeded generation of target recognizers and their mutants.
//!
//! Targets are quotients of the free bimonoid truncated at a term depth
//! `D`: states are the canonical pomsets of depth at most `D`, plus the
//! unit and an absorbing sink for everything deeper.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::pomset::{Alphabet, Op, Pomset};
use crate::recognizer::{LawViolation, PomsetRecognizer, StateId};

/// Default cap on the carrier of a truncated free recognizer.
pub const DEFAULT_STATE_BUDGET: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    pub alphabet_size: usize,
    pub depth_bound: usize,
    pub accept_density: f64,
    /// Cap on the carrier before minimization.
    pub state_budget: usize,
    /// Resample targets whose minimal size exceeds this.
    pub max_states: Option<usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            alphabet_size: 2,
            depth_bound: 2,
            accept_density: 0.5,
            state_budget: DEFAULT_STATE_BUDGET,
            max_states: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("carrier has more than {budget} states")]
    Budget { budget: usize },
    #[error("generated recognizer breaks a law: {0}")]
    Law(#[from] LawViolation),
    #[error("no acceptable target after {attempts} seeds starting at {seed}")]
    Exhausted { seed: u64, attempts: usize },
}

impl GenConfig {
    fn check(&self) -> Result<(), GenError> {
        if self.alphabet_size == 0 {
            return Err(GenError::Config("alphabet size must be at least 1".into()));
        }
        if self.depth_bound == 0 {
            return Err(GenError::Config("depth bound must be at least 1".into()));
        }
        if !(self.accept_density > 0.0 && self.accept_density < 1.0) {
            return Err(GenError::Config("accept density must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// All canonical pomsets over `alphabet` of depth at most `depth`, by
/// increasing size then canonical order. Fails once more than `budget`
/// have been found.
pub fn bounded_pomsets(
    alphabet: &Alphabet,
    depth: usize,
    budget: usize,
) -> Result<Vec<Pomset>, GenError> {
    let mut all: Vec<Pomset> = alphabet
        .letters()
        .iter()
        .cloned()
        .map(Pomset::letter)
        .collect();
    let mut index: HashMap<Pomset, usize> = all.iter().cloned().zip(0..).collect();
    let mut done = 0;
    // Every pomset of depth d + 1 composes two of depth at most d.
    while done < all.len() {
        let end = all.len();
        for i in 0..end {
            for j in 0..end {
                if i < done && j < done {
                    continue;
                }
                for op in Op::ALL {
                    if op == Op::Par && j < i {
                        continue;
                    }
                    let w = op.apply(&all[i], &all[j]);
                    if w.depth() <= depth && !index.contains_key(&w) {
                        if all.len() >= budget {
                            return Err(GenError::Budget { budget });
                        }
                        index.insert(w.clone(), all.len());
                        all.push(w);
                    }
                }
            }
        }
        done = end;
    }
    all.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    Ok(all)
}

/// The free bimonoid truncated at depth `D` with a random accepting set.
pub fn truncated_free_recognizer(cfg: &GenConfig) -> Result<PomsetRecognizer, GenError> {
    cfg.check()?;
    let alphabet =
        Alphabet::standard(cfg.alphabet_size).map_err(|e| GenError::Config(e.to_string()))?;
    // Unit and sink take two of the budgeted states.
    let carrier = bounded_pomsets(
        &alphabet,
        cfg.depth_bound,
        cfg.state_budget.saturating_sub(2),
    )?;
    let n = carrier.len() + 2;
    let (unit, sink) = (0, n - 1);
    let index: HashMap<&Pomset, usize> = carrier.iter().zip(1..).collect();
    let mut tables = [vec![sink; n * n], vec![sink; n * n]];
    for (t, op) in tables.iter_mut().zip(Op::ALL) {
        for x in 0..n {
            t[unit * n + x] = x;
            t[x * n + unit] = x;
        }
        for (i, x) in carrier.iter().enumerate() {
            for (j, y) in carrier.iter().enumerate() {
                if let Some(&k) = index.get(&op.apply(x, y)) {
                    t[(i + 1) * n + j + 1] = k;
                }
            }
        }
    }
    let letters = alphabet
        .letters()
        .iter()
        .map(|l| index[&Pomset::letter(l.clone())])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let accepting = (0..n)
        .map(|s| s != unit && s != sink && rng.gen_bool(cfg.accept_density))
        .collect();
    let mut names = vec!["unit".to_string()];
    names.extend((1..n - 1).map(|i| format!("p{i}")));
    names.push("sink".into());
    let [seq, par] = tables;
    let r = PomsetRecognizer::from_raw(alphabet, names, unit, seq, par, letters, accepting)
        .expect("tables are well formed by construction");
    r.validate()?;
    Ok(r)
}

/// How many consecutive seeds [`random_minimal_target`] tries.
pub const RESAMPLE_ATTEMPTS: usize = 1000;

/// A minimized truncated free recognizer with at least two states (and at
/// most `max_states`), resampling with `seed + 1`, `seed + 2`, ... as needed.
/// Returns the target together with the seed that produced it.
pub fn random_minimal_target(cfg: &GenConfig) -> Result<(PomsetRecognizer, u64), GenError> {
    cfg.check()?;
    for attempt in 0..RESAMPLE_ATTEMPTS as u64 {
        let seed = cfg.seed.wrapping_add(attempt);
        let r = truncated_free_recognizer(&GenConfig {
            seed,
            ..cfg.clone()
        })?
        .minimize();
        let n = r.num_states();
        if n >= 2 && cfg.max_states.is_none_or(|m| n <= m) {
            return Ok((r, seed));
        }
    }
    Err(GenError::Exhausted {
        seed: cfg.seed,
        attempts: RESAMPLE_ATTEMPTS,
    })
}

/// A law-abiding variation of a recognizer.
#[derive(Debug, Clone)]
pub struct Mutant {
    pub recognizer: PomsetRecognizer,
    pub description: String,
    /// Exact verdict against the original.
    pub equivalent: bool,
}

#[derive(Debug, Clone, Copy)]
enum Edit {
    Flip(usize),
    Redirect(Op, usize, usize),
}

/// Up to `budget` candidate edits of `r` (accepting-bit flips and table
/// redirections), in seeded random order; those breaking a law are
/// dropped.
pub fn mutate(r: &PomsetRecognizer, seed: u64, budget: usize) -> Vec<Mutant> {
    let n = r.num_states();
    let unit = r.unit().index();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edits: Vec<Edit> = (0..n).map(Edit::Flip).collect();
    for op in Op::ALL {
        for x in 0..n {
            for y in 0..n {
                if x != unit && y != unit && (op == Op::Seq || x <= y) {
                    edits.push(Edit::Redirect(op, x, y));
                }
            }
        }
    }
    edits.shuffle(&mut rng);
    let mut out = Vec::new();
    for edit in edits.into_iter().take(budget) {
        let mut m = r.clone();
        let description = match edit {
            Edit::Flip(s) => {
                m.accepting[s] = !m.accepting[s];
                format!("flip acceptance of {}", r.state_name(StateId(s)))
            }
            Edit::Redirect(op, x, y) => {
                let old = r.apply(op, StateId(x), StateId(y)).index();
                let mut to = rng.gen_range(0..n - 1);
                if to >= old {
                    to += 1;
                }
                let t = match op {
                    Op::Seq => &mut m.seq,
                    Op::Par => &mut m.par,
                };
                t[x * n + y] = to;
                t[y * n + x] = if op == Op::Par { to } else { t[y * n + x] };
                format!(
                    "{op} {} {} -> {}",
                    r.state_name(StateId(x)),
                    r.state_name(StateId(y)),
                    r.state_name(StateId(to))
                )
            }
        };
        if m.validate().is_err() {
            continue;
        }
        let equivalent = m.equivalent(r).expect("same alphabet").is_equivalent();
        out.push(Mutant {
            recognizer: m,
            description,
            equivalent,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomset::Letter;

    fn cfg(seed: u64, sigma: usize, d: usize) -> GenConfig {
        GenConfig {
            seed,
            alphabet_size: sigma,
            depth_bound: d,
            ..GenConfig::default()
        }
    }

    #[test]
    fn depth_one_over_one_letter() {
        let sigma = Alphabet::standard(1).unwrap();
        let a = Pomset::letter(Letter::new("a").unwrap());
        let got = bounded_pomsets(&sigma, 1, 100).unwrap();
        assert_eq!(got, vec![a.clone(), a.seq(&a), a.par(&a)]);
        let r = truncated_free_recognizer(&cfg(3, 1, 1)).unwrap();
        assert_eq!(r.num_states(), 5);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn sink_absorbs() {
        let r = truncated_free_recognizer(&cfg(9, 2, 2)).unwrap();
        let sink = r.state_by_name("sink").unwrap();
        for x in r.states() {
            for op in Op::ALL {
                assert_eq!(r.apply(op, sink, x), sink);
                assert_eq!(r.apply(op, x, sink), sink);
            }
        }
        assert!(!r.is_accepting(sink));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = truncated_free_recognizer(&cfg(42, 2, 2)).unwrap();
        let b = truncated_free_recognizer(&cfg(42, 2, 2)).unwrap();
        assert_eq!(a.to_file_string(), b.to_file_string());
        let (m1, s1) = random_minimal_target(&cfg(42, 2, 2)).unwrap();
        let (m2, s2) = random_minimal_target(&cfg(42, 2, 2)).unwrap();
        assert_eq!((m1.to_file_string(), s1), (m2.to_file_string(), s2));
    }

    #[test]
    fn minimal_targets_preserve_language() {
        for seed in 1..6 {
            let c = cfg(seed, 2, 1);
            let (m, used) = random_minimal_target(&c).unwrap();
            assert!(m.is_minimal());
            assert_eq!(m.reachable().len(), m.num_states());
            assert!(m.num_states() >= 2);
            let full = truncated_free_recognizer(&GenConfig { seed: used, ..c }).unwrap();
            assert!(full.equivalent(&m).unwrap().is_equivalent());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let c = GenConfig {
            state_budget: 10,
            ..cfg(1, 3, 2)
        };
        assert_eq!(
            truncated_free_recognizer(&c),
            Err(GenError::Budget { budget: 8 })
        );
    }

    #[test]
    fn flips_of_reachable_states_are_inequivalent() {
        let (r, _) = random_minimal_target(&cfg(5, 2, 1)).unwrap();
        let mutants = mutate(&r, 7, usize::MAX);
        assert!(!mutants.is_empty());
        for m in &mutants {
            assert!(m.recognizer.validate().is_ok());
            if m.description.starts_with("flip") {
                assert!(!m.equivalent);
            }
        }
    }

    #[test]
    fn flips_of_unreachable_states_are_equivalent() {
        let mut r = crate::fixtures::at_least_two_b();
        // Make `one` unreachable by mapping `b` to `many`.
        r.letters[1] = 2;
        assert!(r.validate().is_ok());
        let flip = mutate(&r, 0, usize::MAX)
            .into_iter()
            .find(|m| m.description == "flip acceptance of one")
            .unwrap();
        assert!(flip.equivalent);
    }
}
