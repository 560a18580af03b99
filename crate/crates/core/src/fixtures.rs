//! Small recognizers used by tests, benchmarks and the CLI.

use crate::pomset::Alphabet;
use crate::recognizer::{parse_recognizer, PomsetRecognizer};

/// Six-state recognizer over `{a, b, c}` accepting `c`, `a || (b c)`,
/// `a || (b (a || (b c)))`, and so on.
pub const BC_PAR_A: &str = "\
alphabet: a b c
states: one r_a r_b r_c r_bc r_0
unit: one
letters: a -> r_a   b -> r_b   c -> r_c
accepting: r_c
seq:
  r_b r_c -> r_bc
  default -> r_0
par:
  r_a r_bc -> r_c
  default -> r_0
";

pub fn bc_par_a() -> PomsetRecognizer {
    parse_recognizer(BC_PAR_A).expect("built-in recognizer is valid")
}

/// Pomsets over `{a, b}` with at least two `b`s. Three states counting
/// `b`s up to two; `a` maps to the unit.
pub fn at_least_two_b() -> PomsetRecognizer {
    let n = 3;
    let table: Vec<usize> = (0..n * n).map(|k| (k / n + k % n).min(2)).collect();
    PomsetRecognizer::new(
        Alphabet::from_symbols("a b").expect("valid alphabet"),
        vec!["zero".into(), "one".into(), "many".into()],
        0,
        table.clone(),
        table,
        vec![0, 1],
        vec![false, false, true],
    )
    .expect("counting monoid is a bimonoid")
}

/// One state; accepts every pomset over `alphabet`.
pub fn universal(alphabet: &Alphabet) -> PomsetRecognizer {
    PomsetRecognizer::new(
        alphabet.clone(),
        vec!["all".into()],
        0,
        vec![0],
        vec![0],
        vec![0; alphabet.len()],
        vec![true],
    )
    .expect("trivial bimonoid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_minimal() {
        assert!(bc_par_a().is_minimal());
        assert!(at_least_two_b().is_minimal());
        assert!(universal(&Alphabet::standard(2).unwrap()).is_minimal());
    }
}
