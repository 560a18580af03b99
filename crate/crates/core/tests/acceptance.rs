//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (uncaptured) and then asserts.
//!
//! Run with `cargo test -p pomlearn --test acceptance`.

use std::collections::HashSet;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pomlearn::benchgen::{mutate, random_minimal_target, truncated_free_recognizer, GenConfig};
use pomlearn::fixtures::{at_least_two_b, bc_par_a};
use pomlearn::run::{run_learning, RunReport, RunResult, RunSpec};
use pomlearn::wmethod::{suite_for, DEFAULT_CAP};
use pomlearn::{
    canonical_term, lcov_levels, run_suite, test_suite, Alphabet, CeStrategy, CharacterizationSet,
    Context, EbpRecord, EquivalenceStrategy, Learner, LearnerConfig, Op, Pomset, PomsetRecognizer,
    RecognizerError, Side, StateCover, StateId, SuiteVerdict, Teacher, Term, ViolationKind,
};

fn report(criterion: u32, title: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "[{verdict}] criterion {criterion}: {title} -- {detail}"
    );
}

// ---------------------------------------------------------------------------
// Shared corpus

struct CorpusRun {
    seed: u64,
    target_states: usize,
    report: RunReport,
}

struct Corpus {
    runs: Vec<CorpusRun>,
    elapsed: Duration,
}

fn corpus_config(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        alphabet_size: 1 + ((seed - 1) % 3) as usize,
        depth_bound: 2,
        accept_density: 0.3,
        max_states: Some(60),
        ..GenConfig::default()
    }
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let runs = (1..=100)
            .map(|seed| {
                let (target, used) = random_minimal_target(&corpus_config(seed)).unwrap();
                let spec = RunSpec {
                    run_id: format!("corpus-{seed}"),
                    seed: used,
                    audit: true,
                    ..RunSpec::default()
                };
                CorpusRun {
                    seed,
                    target_states: target.num_states(),
                    report: run_learning(&target, &spec),
                }
            })
            .collect();
        Corpus {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

fn ebp_records() -> impl Iterator<Item = &'static EbpRecord> {
    corpus().runs.iter().flat_map(|r| {
        r.report
            .outcome
            .as_ref()
            .map(|o| o.diagnostics.ebp.as_slice())
            .unwrap_or(&[])
    })
}

fn violations(kinds: &[ViolationKind]) -> Vec<String> {
    let mut out = Vec::new();
    for run in &corpus().runs {
        if let Ok(o) = &run.report.outcome {
            for v in &o.diagnostics.violations {
                if kinds.contains(&v.kind) {
                    out.push(format!("seed {}: {v}", run.seed));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_bc_par_a_end_to_end() {
    let target = bc_par_a();
    let expected = target.minimize().num_states();
    let start = Instant::now();
    let spec = RunSpec {
        run_id: "bc_par_a".into(),
        ..RunSpec::default()
    };
    let run = run_learning(&target, &spec);
    let elapsed = start.elapsed();
    let out = run.outcome.as_ref().unwrap();
    let eq = out.hypothesis.equivalent(&target).unwrap().is_equivalent();
    let states = out.hypothesis.num_states();
    let queries = out.stats.equivalence_total;
    let ok = eq && expected == 6 && states == 6 && queries <= 6 && elapsed < Duration::from_secs(1);
    report(
        1,
        "bc || a end-to-end",
        ok,
        &format!(
            "equivalent={eq}, states={states} (expected {expected}), equivalence queries={queries}, {elapsed:?}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_corpus_soundness() {
    let c = corpus();
    let mut failures = Vec::new();
    for run in &c.runs {
        let r = &run.report;
        if r.record.result != RunResult::Ok || r.equivalent != Some(true) {
            failures.push(format!("seed {}: {:?}", run.seed, r.record.result));
        }
        if r.record.equivalence_total > run.target_states as u64 {
            failures.push(format!(
                "seed {}: {} equivalence queries for {} states",
                run.seed, r.record.equivalence_total, run.target_states
            ));
        }
    }
    failures.extend(violations(&[
        ViolationKind::SiftMismatch,
        ViolationKind::BranchDisagreement,
        ViolationKind::Separation,
        ViolationKind::PackTooLarge,
        ViolationKind::EvalMismatch,
        ViolationKind::Compatibility,
        ViolationKind::Validate,
        ViolationKind::NotMinimal,
    ]));
    let sizes: Vec<usize> = c.runs.iter().map(|r| r.target_states).collect();
    let hyps: usize = c
        .runs
        .iter()
        .filter_map(|r| r.report.outcome.as_ref().ok())
        .map(|o| o.diagnostics.hypotheses_built)
        .sum();
    let ok = failures.is_empty() && c.runs.len() == 100 && c.elapsed < Duration::from_secs(300);
    report(
        2,
        "corpus soundness",
        ok,
        &format!(
            "{} runs, target sizes {}..={}, {hyps} audited hypotheses, {} failures, {:?}",
            c.runs.len(),
            sizes.iter().min().unwrap(),
            sizes.iter().max().unwrap(),
            failures.len(),
            c.elapsed
        ),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_3_find_ebp_bounds() {
    let records: Vec<&EbpRecord> = ebp_records().collect();
    let depth_bad = records
        .iter()
        .filter(|r| r.recursions > r.term_depth)
        .count();
    let sharp: Vec<_> = records.iter().filter(|r| r.sharp).collect();
    let query_bad = sharp
        .iter()
        .filter(|r| r.max_uncached_per_level > 2)
        .count();
    let flagged = violations(&[ViolationKind::RecursionBound, ViolationKind::QueryBound]);
    let ok = !records.is_empty() && depth_bad == 0 && query_bad == 0 && flagged.is_empty();
    report(
        3,
        "find_ebp bounds",
        ok,
        &format!(
            "{} searches ({} on sharp packs), {depth_bad} over depth, {query_bad} over 2 fresh queries per level",
            records.len(),
            sharp.len()
        ),
    );
    assert!(ok, "{flagged:#?}");
}

/// Agreement evaluations spent by the first breaking-point search on `term`.
fn agree_evals(strategy: CeStrategy, term: &Term) -> u64 {
    let mut teacher = Teacher::new(at_least_two_b(), EquivalenceStrategy::Exact);
    let config = LearnerConfig {
        ce_strategy: strategy,
        ..LearnerConfig::default()
    };
    let mut learner = Learner::new(&mut teacher, config);
    let hyp = learner.initialize().unwrap();
    let w = term.canonicalize();
    assert_ne!(
        hyp.accepts(&w).unwrap(),
        at_least_two_b().accepts(&w).unwrap()
    );
    learner.handle_ce_with_term(term).unwrap();
    let record = learner.diagnostics().ebp[0];
    assert_eq!(record.strategy, strategy);
    record.agree_evals
}

#[test]
fn criterion_4_strategy_separation() {
    let sigma = Alphabet::from_symbols("a b").unwrap();
    let a = Pomset::letter(sigma.get("a").unwrap().clone());
    let b = Pomset::letter(sigma.get("b").unwrap().clone());
    const M: usize = 256;

    // Complete binary: a flat sequence of 256 letters ending in `b b`.
    let flat = Pomset::seq_all((0..M).map(|i| if i >= M - 2 { b.clone() } else { a.clone() }));
    let balanced = canonical_term(&flat);
    assert_eq!(balanced.depth(), 8);
    assert_eq!(balanced.leaf_count(), M);

    // Left-linear chain alternating the operators so nothing flattens; the
    // two `b`s are the deepest leaves.
    let bt = canonical_term(&b);
    let at = canonical_term(&a);
    let mut chain = Term::inner(Op::Seq, bt.clone(), bt);
    for i in 1..M - 1 {
        let op = if i % 2 == 1 { Op::Par } else { Op::Seq };
        chain = Term::inner(op, chain, at.clone());
    }
    assert_eq!(chain.leaf_count(), M);
    assert_eq!(canonical_term(&chain.canonicalize()), chain);

    let (bf, bl) = (
        agree_evals(CeStrategy::FindEbp, &balanced),
        agree_evals(CeStrategy::Linear, &balanced),
    );
    let (cf, cl) = (
        agree_evals(CeStrategy::FindEbp, &chain),
        agree_evals(CeStrategy::Linear, &chain),
    );
    let ratio_b = bl as f64 / bf as f64;
    let ratio_c = cl.max(cf) as f64 / cl.min(cf) as f64;
    let ok = ratio_b >= 8.0 && ratio_c <= 3.0;
    report(
        4,
        "strategy separation",
        ok,
        &format!(
            "binary: findebp {bf} vs linear {bl} (x{ratio_b:.1}); chain: findebp {cf} vs linear {cl} (x{ratio_c:.2})"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_breaking_points_separate() {
    let n = ebp_records().count();
    let bad = violations(&[ViolationKind::BreakingPoint]);
    let ok = n > 0 && bad.is_empty();
    report(
        5,
        "breaking points separate",
        ok,
        &format!("{n} breaking points checked, {} violations", bad.len()),
    );
    assert!(ok, "{bad:#?}");
}

#[test]
fn criterion_6_sharpness_and_closure() {
    let bad = violations(&[
        ViolationKind::NotSharp,
        ViolationKind::NoProgress,
        ViolationKind::SubpomsetClosure,
        ViolationKind::ContextShape,
    ]);
    let handled: usize = corpus()
        .runs
        .iter()
        .filter_map(|r| r.report.outcome.as_ref().ok())
        .map(|o| o.diagnostics.handle_ce_calls)
        .sum();
    let ok = handled > 0 && bad.is_empty();
    report(
        6,
        "sharpness and closure",
        ok,
        &format!(
            "{handled} counter-examples handled, {} violations",
            bad.len()
        ),
    );
    assert!(ok, "{bad:#?}");
}

fn small_config(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        alphabet_size: 1,
        depth_bound: 1,
        accept_density: if seed.is_multiple_of(2) { 0.5 } else { 0.3 },
        max_states: Some(4),
        ..GenConfig::default()
    }
}

#[test]
fn criterion_7_wmethod_completeness() {
    const K: usize = 2;
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut ok_runs, mut flagged) = (0, 0);
    let mut targets: Vec<(PomsetRecognizer, u64)> = Vec::new();
    for seed in 1..=20 {
        let (target, used) = random_minimal_target(&small_config(seed)).unwrap();
        let spec = RunSpec {
            run_id: format!("wmethod-{seed}"),
            seed: used,
            equivalence: EquivalenceStrategy::TestSuite {
                k: K,
                cap: DEFAULT_CAP,
            },
            ..RunSpec::default()
        };
        let run = run_learning(&target, &spec);
        match run.record.result {
            RunResult::Ok => ok_runs += 1,
            RunResult::BoundViolation => flagged += 1,
            RunResult::Error => failures.push(format!("seed {seed}: {:?}", run.outcome.err())),
        }
        targets.push((target, used));
    }

    // Mutation analysis against the suite of each distinct target.
    let mut seen = HashSet::new();
    let (mut checked, mut mismatches, mut inequivalent) = (0, 0, 0);
    for (h, used) in &targets {
        if !seen.insert(h.to_file_string()) {
            continue;
        }
        let suite = suite_for(h, K, DEFAULT_CAP).unwrap();
        let full = truncated_free_recognizer(&GenConfig {
            seed: *used,
            ..small_config(*used)
        })
        .unwrap();
        let mut mutants = mutate(h, *used, 64);
        mutants.extend(mutate(&full, *used + 1000, 64));
        for m in mutants {
            let r = &m.recognizer;
            if r.minimize().num_states() > h.num_states() + K {
                continue;
            }
            let exact = h.equivalent(r).unwrap().is_equivalent();
            let verdict = run_suite::<RecognizerError>(&suite, h, |w| r.accepts(w)).unwrap();
            checked += 1;
            inequivalent += usize::from(!exact);
            if (verdict == SuiteVerdict::Pass) != exact {
                mismatches += 1;
                failures.push(format!("mutant `{}` of seed {used}", m.description));
            }
        }
    }
    let ok = failures.is_empty() && checked >= 50 && mismatches == 0;
    report(
        7,
        "w-method completeness (k = 2)",
        ok,
        &format!(
            "20 runs: {ok_runs} exact, {flagged} flagged bound violations; {checked} mutants within the bound ({inequivalent} inequivalent), {mismatches} verdict mismatches; {:?}",
            start.elapsed()
        ),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_8_lcov_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for i in 0..10 {
        let sigma = Alphabet::standard(if i % 2 == 0 { 1 } else { 2 }).unwrap();
        let size = rng.gen_range(1..=3);
        let extra = random_pomset(&mut rng, &sigma, size);
        let cover = if i % 2 == 0 {
            StateCover::from_elements([extra])
        } else {
            StateCover::from_elements([])
        };
        let (_, sizes) = lcov_levels(&cover, &sigma, 3, 10_000_000).unwrap();
        for w in sizes.windows(2) {
            let u = w[0] as f64;
            // eps is always in the cover, so eps ∘ u = u collides: strict.
            if w[1] as f64 >= 1.5 * u * u + u {
                failures.push(format!("cover {i}: {sizes:?}"));
            }
        }
        summary.push(format!("{sizes:?}"));
        let contexts: Vec<Context> = (0..rng.gen_range(0..3))
            .map(|_| {
                let s = random_pomset(&mut rng, &sigma, 2);
                let op = if rng.gen_bool(0.5) { Op::Seq } else { Op::Par };
                let side = if rng.gen_bool(0.5) {
                    Side::Left
                } else {
                    Side::Right
                };
                Context::hole().wrap(op, side, &s)
            })
            .collect();
        let chars = CharacterizationSet::from_contexts(contexts);
        for k in 0..2 {
            let z = test_suite(&cover, &chars, &sigma, k, 10_000_000).unwrap();
            if z.count() > z.bound() {
                failures.push(format!("cover {i}, k = {k}: |Z| above |W||Lcov|"));
            }
        }
    }
    let ok = failures.is_empty();
    report(
        8,
        "lcov counting",
        ok,
        &format!("10 covers, level sizes {}", summary.join(" ")),
    );
    assert!(ok, "{failures:#?}");
}

fn random_pomset(rng: &mut ChaCha8Rng, sigma: &Alphabet, size: usize) -> Pomset {
    if size <= 1 {
        let l = &sigma.letters()[rng.gen_range(0..sigma.len())];
        return Pomset::letter(l.clone());
    }
    let left = rng.gen_range(1..size);
    let op = if rng.gen_bool(0.5) { Op::Seq } else { Op::Par };
    op.apply(
        &random_pomset(rng, sigma, left),
        &random_pomset(rng, sigma, size - left),
    )
}

// ---------------------------------------------------------------------------
// Criterion 9

fn term_strategy(sigma: Alphabet) -> impl Strategy<Value = Term> {
    let letters = sigma.letters().to_vec();
    let leaf = prop_oneof![
        1 => Just(Term::Epsilon),
        4 => proptest::sample::select(letters).prop_map(Term::letter),
    ];
    leaf.prop_recursive(5, 32, 2, |inner| {
        (inner.clone(), inner, any::<bool>())
            .prop_map(|(l, r, seq)| Term::inner(if seq { Op::Seq } else { Op::Par }, l, r))
    })
}

fn frames_strategy(sigma: Alphabet) -> impl Strategy<Value = Vec<(bool, bool, Term)>> {
    proptest::collection::vec((any::<bool>(), any::<bool>(), term_strategy(sigma)), 0..4)
}

fn build_context(frames: &[(bool, bool, Term)]) -> Context {
    frames.iter().fold(Context::hole(), |c, (seq, left, t)| {
        let op = if *seq { Op::Seq } else { Op::Par };
        let side = if *left { Side::Left } else { Side::Right };
        c.wrap(op, side, &t.canonicalize())
    })
}

/// Evaluates a term bottom-up with the tables, bypassing canonical forms.
fn table_eval(r: &PomsetRecognizer, t: &Term) -> StateId {
    match t {
        Term::Epsilon => r.unit(),
        Term::Leaf(pomlearn::Atom::Letter(l)) => r.letter_state(l).unwrap(),
        Term::Leaf(_) => panic!("hole in a closed term"),
        Term::Inner(op, a, b) => r.apply(*op, table_eval(r, a), table_eval(r, b)),
    }
}

/// Every epsilon-free term with exactly `n` letters.
fn terms_of_size(sigma: &Alphabet, n: usize) -> Vec<Term> {
    if n == 1 {
        return sigma.letters().iter().cloned().map(Term::letter).collect();
    }
    let mut out = Vec::new();
    for left in 1..n {
        let ls = terms_of_size(sigma, left);
        let rs = terms_of_size(sigma, n - left);
        for l in &ls {
            for r in &rs {
                for op in Op::ALL {
                    out.push(Term::inner(op, l.clone(), r.clone()));
                }
            }
        }
    }
    out
}

#[test]
fn criterion_9_algebra_properties() {
    const CASES: u32 = 10_000;
    let sigma = Alphabet::from_symbols("a b c").unwrap();
    let recognizers = [bc_par_a(), {
        let (r, _) = random_minimal_target(&GenConfig {
            seed: 99,
            alphabet_size: 3,
            depth_bound: 1,
            accept_density: 0.4,
            ..GenConfig::default()
        })
        .unwrap();
        r
    }];
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        });
        results.push((name, f(&mut runner)));
    };
    let t = || term_strategy(sigma.clone());
    run("seq associativity", &|r| {
        r.run(&(t(), t(), t()), |(x, y, z)| {
            let (x, y, z) = (x.canonicalize(), y.canonicalize(), z.canonicalize());
            prop_assert_eq!(x.seq(&y).seq(&z), x.seq(&y.seq(&z)));
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("par associativity and commutativity", &|r| {
        r.run(&(t(), t(), t()), |(x, y, z)| {
            let (x, y, z) = (x.canonicalize(), y.canonicalize(), z.canonicalize());
            prop_assert_eq!(x.par(&y).par(&z), x.par(&y.par(&z)));
            prop_assert_eq!(x.par(&y), y.par(&x));
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("eps neutrality", &|r| {
        r.run(&t(), |x| {
            let x = x.canonicalize();
            let e = Pomset::Empty;
            prop_assert_eq!(e.seq(&x), x.clone());
            prop_assert_eq!(x.seq(&e), x.clone());
            prop_assert_eq!(e.par(&x), x.clone());
            prop_assert_eq!(x.par(&e), x);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("canonicalization idempotence", &|r| {
        r.run(&t(), |x| {
            let w = x.canonicalize();
            let again = canonical_term(&w);
            prop_assert_eq!(again.canonicalize(), w.clone());
            prop_assert_eq!(canonical_term(&again.canonicalize()), again);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("eval homomorphism", &|r| {
        r.run(&(t(), t(), any::<bool>()), |(x, y, seq)| {
            let (x, y) = (x.canonicalize(), y.canonicalize());
            let op = if seq { Op::Seq } else { Op::Par };
            for rec in &recognizers {
                let lhs = rec.eval(&op.apply(&x, &y)).unwrap();
                let rhs = rec.apply(op, rec.eval(&x).unwrap(), rec.eval(&y).unwrap());
                prop_assert_eq!(lhs, rhs);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    let witnesses: Vec<_> = recognizers.iter().map(|r| r.reachable()).collect();
    run("context freeness", &|r| {
        r.run(&(frames_strategy(sigma.clone()), t()), |(frames, x)| {
            let c = build_context(&frames);
            let x = x.canonicalize();
            for (rec, wit) in recognizers.iter().zip(&witnesses) {
                let y = &wit[&rec.eval(&x).unwrap()];
                prop_assert_eq!(
                    rec.eval(&c.fill(&x)).unwrap(),
                    rec.eval(&c.fill(y)).unwrap()
                );
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });

    // Brute force over all terms with at most five letters.
    let mut brute_terms = 0usize;
    let mut brute_bad = Vec::new();
    for seed in 1..=10u64 {
        let (rec, _) = random_minimal_target(&GenConfig {
            seed,
            alphabet_size: 1 + (seed % 2) as usize,
            depth_bound: 1 + (seed % 2) as usize,
            accept_density: 0.4,
            ..GenConfig::default()
        })
        .unwrap();
        let sigma = rec.alphabet().clone();
        let mut terms = vec![Term::Epsilon];
        for n in 1..=5 {
            terms.extend(terms_of_size(&sigma, n));
        }
        for term in &terms {
            brute_terms += 1;
            let direct = rec.is_accepting(table_eval(&rec, term));
            if rec.accepts(&term.canonicalize()).unwrap() != direct {
                brute_bad.push(format!("seed {seed}: {}", pomlearn::format_term(term)));
            }
        }
    }
    results.push((
        "brute-force acceptance",
        if brute_bad.is_empty() {
            Ok(())
        } else {
            Err(brute_bad.join(", "))
        },
    ));

    let failed: Vec<_> = results.iter().filter(|(_, r)| r.is_err()).collect();
    let ok = failed.is_empty();
    report(
        9,
        "algebra properties",
        ok,
        &format!(
            "{} property groups x {CASES} cases, {brute_terms} brute-force terms on 10 recognizers, {} failing",
            results.len() - 1,
            failed.len()
        ),
    );
    assert!(ok, "{failed:#?}");
}
