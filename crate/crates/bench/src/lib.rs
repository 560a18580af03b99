//! Benchmark fixtures.

use pomlearn::benchgen::{random_minimal_target, GenConfig};
use pomlearn::{canonical_term, Alphabet, Op, Pomset, PomsetRecognizer, Term};

/// Generated targets of the given alphabet size, one per seed.
pub fn targets(
    alphabet_size: usize,
    depth_bound: usize,
    seeds: std::ops::Range<u64>,
) -> Vec<PomsetRecognizer> {
    seeds
        .map(|seed| {
            let cfg = GenConfig {
                seed,
                alphabet_size,
                depth_bound,
                accept_density: 0.3,
                ..GenConfig::default()
            };
            random_minimal_target(&cfg).expect("generator settles").0
        })
        .collect()
}

/// Balanced term over `{a, b}` with `leaves` letters, the last two `b`.
pub fn balanced_counterexample(leaves: usize) -> Term {
    let (a, b) = letters();
    canonical_term(&Pomset::seq_all((0..leaves).map(|i| {
        if i + 2 >= leaves {
            b.clone()
        } else {
            a.clone()
        }
    })))
}

/// Left-linear term over `{a, b}` alternating `;` and `||`, with the two
/// `b`s innermost.
pub fn chain_counterexample(leaves: usize) -> Term {
    let (a, b) = letters();
    let (at, bt) = (canonical_term(&a), canonical_term(&b));
    let mut t = Term::inner(Op::Seq, bt.clone(), bt);
    for i in 1..leaves.saturating_sub(1) {
        let op = if i % 2 == 1 { Op::Par } else { Op::Seq };
        t = Term::inner(op, t, at.clone());
    }
    t
}

fn letters() -> (Pomset, Pomset) {
    let sigma = Alphabet::from_symbols("a b").expect("valid alphabet");
    let l = |s| Pomset::letter(sigma.get(s).expect("letter").clone());
    (l("a"), l("b"))
}
