use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pomlearn::fixtures::{at_least_two_b, BC_PAR_A};
use pomlearn::parse_recognizer;

fn pomlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pomlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_example() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ex.pom", BC_PAR_A);
    let o = pomlearn(&["validate", s(&f)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("valid: 6 states"), "{}", stdout(&o));
}

#[test]
fn learn_example_prints_hypothesis_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ex.pom", BC_PAR_A);
    let csv = dir.path().join("runs.csv");
    let trace = dir.path().join("trace.txt");
    let o = pomlearn(&["learn", s(&f), "--stats", s(&csv), "--trace", s(&trace)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.trim_end().ends_with("equivalent: true"));
    let body: String = out
        .lines()
        .filter(|l| !l.starts_with("equivalent"))
        .map(|l| format!("{l}\n"))
        .collect();
    let learned = parse_recognizer(&body).unwrap();
    assert_eq!(learned.num_states(), 6);

    let rows = fs::read_to_string(&csv).unwrap();
    let mut lines = rows.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("run_id,seed,target_states"));
    assert!(lines.next().unwrap().contains(",ok,"));
    assert!(!fs::read_to_string(&trace).unwrap().is_empty());

    // A second run appends without repeating the header.
    let o = pomlearn(&["learn", s(&f), "--ce", "linear", "--stats", s(&csv)]);
    assert!(o.status.success());
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert_eq!(rows.matches("run_id").count(), 1);
}

#[test]
fn learn_with_wmethod_teacher() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "b.pom", &at_least_two_b().to_file_string());
    let o = pomlearn(&["learn", s(&f), "--equiv", "wmethod:1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("equivalent: true"));
}

#[test]
fn equiv_same_and_different() {
    let dir = tempfile::tempdir().unwrap();
    let ex = write(dir.path(), "ex.pom", BC_PAR_A);
    let b = write(dir.path(), "b.pom", &at_least_two_b().to_file_string());
    let o = pomlearn(&["equiv", s(&ex), s(&ex)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "Equivalent");

    // Different alphabets are a usage error.
    let o = pomlearn(&["equiv", s(&ex), s(&b)]);
    assert_ne!(o.status.code(), Some(0));

    // Also accepting `one` gives a different language.
    let flipped: String = at_least_two_b()
        .to_file_string()
        .lines()
        .map(|l| {
            if l.starts_with("accepting:") {
                "accepting: one many".to_string()
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    assert!(!parse_recognizer(&flipped)
        .unwrap()
        .equivalent(&at_least_two_b())
        .unwrap()
        .is_equivalent());
    let c = write(dir.path(), "c.pom", &flipped);
    let o = pomlearn(&["equiv", s(&b), s(&c)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("counterexample: "));
}

#[test]
fn testsuite_lists_terms() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.pom", &at_least_two_b().to_file_string());
    let o = pomlearn(&["testsuite", s(&b), "--k", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# |P| = 3"), "{header}");
    let tests: usize = header.rsplit("tests = ").next().unwrap().parse().unwrap();
    assert_eq!(lines.count(), tests);
}

#[test]
fn testsuite_over_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ex.pom", BC_PAR_A);
    let o = pomlearn(&["testsuite", s(&f), "--k", "3", "--max-suite", "1000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("kind=budget"), "{}", stderr(&o));
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ex.pom", BC_PAR_A);
    let o = pomlearn(&["learn", s(&f), "--equiv", "wmethod"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(dir.path(), "bad.pom", "alphabet a\nstates x\n");
    let o = pomlearn(&["validate", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("pomlearn: error: "));

    let o = pomlearn(&["validate", s(&dir.path().join("missing.pom"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_writes_manifest() {
    let a = pomlearn(&["gen", "--seed", "7", "--alphabet", "2", "--depth", "1"]);
    let b = pomlearn(&["gen", "--seed", "7", "--alphabet", "2", "--depth", "1"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("# seed "));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let o = pomlearn(&[
        "gen",
        "--seed",
        "1",
        "--depth",
        "1",
        "--count",
        "3",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    for i in 1..=3 {
        let text = fs::read_to_string(out.join(format!("target_{i:04}.pom"))).unwrap();
        assert!(parse_recognizer(&text).unwrap().is_minimal());
    }
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = pomlearn(&[
        "bench",
        "--seed",
        "1",
        "--depth",
        "1",
        "--count",
        "4",
        "--cycle-alphabet",
        "2",
        "--stats",
        s(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("runs: 4"), "{}", stdout(&o));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);
}
