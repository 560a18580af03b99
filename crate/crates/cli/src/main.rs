use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pomlearn::benchgen::{random_minimal_target, GenConfig, GenError, DEFAULT_STATE_BUDGET};
use pomlearn::run::{run_learning, RunRecord, RunResult, RunSpec};
use pomlearn::wmethod::{suite_for, DEFAULT_CAP};
use pomlearn::{
    canonical_term, format_term, parse_recognizer, CeStrategy, Equivalence, EquivalenceStrategy,
    LearnError, PomsetRecognizer, RecognizerError, SuiteError, TeacherError,
};

#[derive(Parser)]
#[command(
    name = "pomlearn",
    version,
    about = "Learn and test pomset recognizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a recognizer file and check the bimonoid laws.
    Validate { file: PathBuf },
    /// Learn the language of a target recognizer through a simulated teacher.
    Learn {
        target: PathBuf,
        #[command(flatten)]
        opts: LearnOpts,
        /// Seed recorded in the CSV row.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append a CSV run record to this file.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write the learner trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check two recognizers for language equivalence.
    Equiv { left: PathBuf, right: PathBuf },
    /// Print the conformance test suite of a recognizer, one term per line.
    Testsuite {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        max_suite: usize,
    },
    /// Generate a random minimal target recognizer.
    Gen {
        #[command(flatten)]
        gen: GenOpts,
        /// Generate this many targets (seeds seed, seed+1, ...) into --out-dir.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Learn a generated corpus and write one CSV row per run.
    Bench {
        #[command(flatten)]
        gen: GenOpts,
        #[command(flatten)]
        opts: LearnOpts,
        #[arg(long, default_value_t = 10)]
        count: u64,
        /// Cycle through alphabet sizes 1..=N instead of a fixed size.
        #[arg(long)]
        cycle_alphabet: Option<usize>,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct LearnOpts {
    /// `exact` or `wmethod:<k>`.
    #[arg(long, default_value = "exact", value_parser = parse_equiv)]
    equiv: EquivChoice,
    /// `findebp` or `linear`.
    #[arg(long, default_value = "findebp")]
    ce: CeStrategy,
    /// Element cap for W-method suites.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    max_suite: usize,
}

#[derive(Args, Clone)]
struct GenOpts {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
    budget: usize,
    #[arg(long)]
    max_states: Option<usize>,
}

impl GenOpts {
    fn config(&self, seed: u64, alphabet: usize) -> GenConfig {
        GenConfig {
            seed,
            alphabet_size: alphabet,
            depth_bound: self.depth,
            accept_density: self.density,
            state_budget: self.budget,
            max_states: self.max_states,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum EquivChoice {
    Exact,
    WMethod(usize),
}

fn parse_equiv(s: &str) -> Result<EquivChoice, String> {
    if s == "exact" {
        return Ok(EquivChoice::Exact);
    }
    s.strip_prefix("wmethod:")
        .and_then(|k| k.parse().ok())
        .map(EquivChoice::WMethod)
        .ok_or_else(|| format!("expected `exact` or `wmethod:<k>`, got `{s}`"))
}

impl LearnOpts {
    fn strategy(&self) -> EquivalenceStrategy {
        match self.equiv {
            EquivChoice::Exact => EquivalenceStrategy::Exact,
            EquivChoice::WMethod(k) => EquivalenceStrategy::TestSuite {
                k,
                cap: self.max_suite,
            },
        }
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn property(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: "property",
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: 2,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    fn budget(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            kind: "budget",
            message: message.into(),
        }
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Budget { .. } => Failure::budget(e.to_string()),
            other => Failure::property(other.to_string()),
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Budget { .. } => Failure::budget(e.to_string()),
            GenError::Config(_) => Failure::usage(e.to_string()),
            other => Failure::property(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<PomsetRecognizer, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_recognizer(&text).map_err(|e| match e {
        RecognizerError::Law(_) => Failure::property(format!("{}: {e}", path.display())),
        _ => Failure {
            code: 2,
            kind: "parse",
            message: format!("{}: {e}", path.display()),
        },
    })
}

fn stdout_line(out: &mut impl Write, line: std::fmt::Arguments) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pomlearn: error: {}", f.message);
            eprintln!(
                "error kind={} code={} message={:?}",
                f.kind, f.code, f.message
            );
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match command {
        Command::Validate { file } => {
            let r = load(&file)?;
            let reachable = r.reachable().len();
            stdout_line(
                &mut out,
                format_args!(
                    "valid: {} states, {} reachable, minimal: {}",
                    r.num_states(),
                    reachable,
                    r.is_minimal()
                ),
            )?;
        }
        Command::Learn {
            target,
            opts,
            seed,
            stats,
            trace,
        } => learn(
            &mut out,
            &target,
            &opts,
            seed,
            stats.as_deref(),
            trace.as_deref(),
        )?,
        Command::Equiv { left, right } => {
            let (l, r) = (load(&left)?, load(&right)?);
            match l
                .equivalent(&r)
                .map_err(|e| Failure::property(e.to_string()))?
            {
                Equivalence::Equivalent => stdout_line(&mut out, format_args!("Equivalent"))?,
                Equivalence::CounterExample(w) => {
                    stdout_line(
                        &mut out,
                        format_args!("counterexample: {}", format_term(&canonical_term(&w))),
                    )?;
                    out.flush().ok();
                    return Err(Failure::property("recognizers are not equivalent"));
                }
            }
        }
        Command::Testsuite { file, k, max_suite } => {
            let r = load(&file)?;
            let suite = suite_for(&r, k, max_suite)?;
            let count = suite.count();
            stdout_line(
                &mut out,
                format_args!(
                    "# |P| = {}, |W| = {}, k = {k}, tests = {count}",
                    pomlearn::state_cover(&r.minimize())
                        .map(|p| p.len())
                        .unwrap_or(0),
                    suite.contexts().len()
                ),
            )?;
            for z in suite.iter() {
                stdout_line(
                    &mut out,
                    format_args!("{}", format_term(&canonical_term(&z))),
                )?;
            }
        }
        Command::Gen {
            gen,
            count,
            out_dir,
        } => generate(&mut out, &gen, count, out_dir.as_deref())?,
        Command::Bench {
            gen,
            opts,
            count,
            cycle_alphabet,
            stats,
        } => bench(
            &mut out,
            &gen,
            &opts,
            count,
            cycle_alphabet,
            stats.as_deref(),
        )?,
    }
    out.flush()
        .map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn learn_error(e: &LearnError) -> Failure {
    match e {
        LearnError::Teacher(t @ TeacherError::Suite(SuiteError::Budget { .. })) => {
            Failure::budget(t.to_string())
        }
        other => Failure::property(other.to_string()),
    }
}

fn learn(
    out: &mut impl Write,
    target_path: &Path,
    opts: &LearnOpts,
    seed: u64,
    stats: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    let target = load(target_path)?;
    let spec = RunSpec {
        run_id: target_path.display().to_string(),
        seed,
        ce_strategy: opts.ce,
        equivalence: opts.strategy(),
        trace: trace.is_some(),
        ..RunSpec::default()
    };
    let report = run_learning(&target, &spec);
    if let Some(path) = stats {
        append_records(path, std::slice::from_ref(&report.record))?;
    }
    let outcome = report.outcome.as_ref().map_err(learn_error)?;
    if let Some(path) = trace {
        let mut f = BufWriter::new(File::create(path).map_err(|e| Failure::io(path, e))?);
        for ev in &outcome.trace {
            writeln!(f, "{ev}").map_err(|e| Failure::io(path, e))?;
        }
        f.flush().map_err(|e| Failure::io(path, e))?;
    }
    write!(out, "{}", outcome.hypothesis).map_err(|e| Failure::io(Path::new("<stdout>"), e))?;
    let eq = report.equivalent == Some(true);
    stdout_line(out, format_args!("equivalent: {eq}"))?;
    match report.record.result {
        RunResult::Ok => Ok(()),
        RunResult::BoundViolation => {
            out.flush().ok();
            Err(Failure::property(
                "test suite passed an inequivalent hypothesis: target exceeds the k bound",
            ))
        }
        RunResult::Error => {
            out.flush().ok();
            Err(Failure::property(
                "learned hypothesis is not equivalent to the target",
            ))
        }
    }
}

/// Appends rows, writing the header first if the file is new or empty.
fn append_records(path: &Path, records: &[RunRecord]) -> Result<(), Failure> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    for r in records {
        w.serialize(r)
            .map_err(|e| Failure::io(path, io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

fn generate(
    out: &mut impl Write,
    gen: &GenOpts,
    count: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<(), Failure> {
    let Some(dir) = out_dir else {
        if count.is_some() {
            return Err(Failure::usage("--count requires --out-dir"));
        }
        let (r, seed) = random_minimal_target(&gen.config(gen.seed, gen.alphabet))?;
        stdout_line(out, format_args!("# seed {seed}"))?;
        return write!(out, "{r}").map_err(|e| Failure::io(Path::new("<stdout>"), e));
    };
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = csv::Writer::from_path(&manifest_path)
        .map_err(|e| Failure::io(&manifest_path, io::Error::other(e)))?;
    manifest
        .write_record([
            "file",
            "seed",
            "alphabet_size",
            "depth_bound",
            "accept_density",
            "states",
            "minimal",
        ])
        .map_err(|e| Failure::io(&manifest_path, io::Error::other(e)))?;
    for i in 0..count.unwrap_or(1) {
        let cfg = gen.config(gen.seed + i, gen.alphabet);
        let (r, seed) = random_minimal_target(&cfg)?;
        let name = format!("target_{:04}.pom", gen.seed + i);
        let path = dir.join(&name);
        fs::write(&path, r.to_file_string()).map_err(|e| Failure::io(&path, e))?;
        manifest
            .write_record([
                name,
                seed.to_string(),
                cfg.alphabet_size.to_string(),
                cfg.depth_bound.to_string(),
                cfg.accept_density.to_string(),
                r.num_states().to_string(),
                r.is_minimal().to_string(),
            ])
            .map_err(|e| Failure::io(&manifest_path, io::Error::other(e)))?;
    }
    manifest
        .flush()
        .map_err(|e| Failure::io(&manifest_path, e))?;
    stdout_line(out, format_args!("wrote {}", manifest_path.display()))
}

fn bench(
    out: &mut impl Write,
    gen: &GenOpts,
    opts: &LearnOpts,
    count: u64,
    cycle_alphabet: Option<usize>,
    stats: Option<&Path>,
) -> Result<(), Failure> {
    let configs: Vec<GenConfig> = (0..count)
        .map(|i| {
            let seed = gen.seed + i;
            let alphabet = match cycle_alphabet {
                Some(n) if n > 0 => 1 + (i as usize % n),
                _ => gen.alphabet,
            };
            gen.config(seed, alphabet)
        })
        .collect();
    let (tx, rx) = mpsc::channel::<Result<RunRecord, Failure>>();
    let writer = {
        let stats = stats.map(Path::to_path_buf);
        std::thread::spawn(move || -> Result<Vec<RunRecord>, Failure> {
            // Single writer: rows are appended in completion order.
            let mut all = Vec::new();
            for msg in rx {
                let record = msg?;
                if let Some(path) = &stats {
                    append_records(path, std::slice::from_ref(&record))?;
                }
                all.push(record);
            }
            Ok(all)
        })
    };
    configs.par_iter().for_each_with(tx, |tx, cfg| {
        let msg = random_minimal_target(cfg)
            .map_err(Failure::from)
            .map(|(target, seed)| {
                let spec = RunSpec {
                    run_id: format!("seed-{}-sigma-{}", cfg.seed, cfg.alphabet_size),
                    seed,
                    ce_strategy: opts.ce,
                    equivalence: opts.strategy(),
                    ..RunSpec::default()
                };
                run_learning(&target, &spec).record
            });
        let _ = tx.send(msg);
    });
    let records = writer
        .join()
        .map_err(|_| Failure::property("writer thread panicked"))??;
    let ok = records.iter().filter(|r| r.result == RunResult::Ok).count();
    let bound = records
        .iter()
        .filter(|r| r.result == RunResult::BoundViolation)
        .count();
    let errors = records.len() - ok - bound;
    stdout_line(
        out,
        format_args!(
            "runs: {}, ok: {ok}, bound_violation: {bound}, error: {errors}",
            records.len()
        ),
    )?;
    if errors > 0 {
        return Err(Failure::property(format!("{errors} run(s) failed")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn equiv_choice_parses() {
        assert!(matches!(parse_equiv("exact"), Ok(EquivChoice::Exact)));
        assert!(parse_equiv("wmethod:2").is_ok());
        assert!(parse_equiv("wmethod:").is_err());
        assert!(parse_equiv("pmethod").is_err());
    }
}
