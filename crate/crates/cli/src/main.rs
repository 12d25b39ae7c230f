use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use fpbias::harness::{
    self, compute_weights, cross_engine_check_with, Engine, EngineOverrides, ExperimentReport,
    Subject, Theorem, DEFAULT_CROSS_PATH, DEFAULT_CROSS_POLY,
};
use fpbias::limits::Parity;
use fpbias::numeric::format_rational;
use fpbias::perm::{avoiding_involutions, MAX_BRUTE_FORCE_N};
use fpbias::series::write_weights_csv;
use fpbias::{
    biased_distribution, Direction, Pattern, Probabilities, Real, SeriesTable, SigmaClass,
};

/// Fixed points of biased pattern-avoiding involutions: exact laws and limit checks.
#[derive(Parser, Debug)]
#[command(name = "fpbias", version)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for Monte Carlo steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PatternClass {
    C321,
    C231,
    Inc,
    Dec,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the involutions of length n avoiding a pattern, with fixed points.
    Enumerate {
        #[arg(long)]
        n: usize,
        /// Explicit pattern (e.g. 231, 4321) or incM / decM.
        #[arg(long, value_parser = parse_pattern)]
        pattern: Pattern,
    },
    /// Emit the weight row (n, j, count) of a pattern class.
    Weights(ClassArgs),
    /// Emit the law of fp under the bias q^fp.
    Dist {
        #[command(flatten)]
        class: ClassArgs,
        /// Bias: "p/q", a decimal (both exact) or exponent notation (float).
        #[arg(long, value_parser = parse_real)]
        q: Real,
    },
    /// Run a convergence experiment and write its report.
    Verify {
        /// t1, t2, t3 or t4 (t3a/t3b/t3c are accepted as aliases of t3).
        #[arg(long, value_parser = parse_theorem)]
        theorem: Theorem,
        #[arg(long, value_parser = parse_real)]
        q: Real,
        /// Monotone pattern length minus one (t1, t2).
        #[arg(long)]
        k: Option<usize>,
        /// Parity class of the limit (t1).
        #[arg(long, value_parser = parse_parity, default_value = "even")]
        parity: Parity,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        /// Monte Carlo draws for the GOE limit (t2, k >= 3).
        #[arg(long, default_value_t = harness::thresholds::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Cross-check every engine against the others.
    Selftest {
        /// A series table (JSON) replacing the generating-function output.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CROSS_POLY)]
        n_max_poly: usize,
        #[arg(long, default_value_t = DEFAULT_CROSS_PATH)]
        n_max_path: usize,
    },
}

#[derive(clap::Args, Debug)]
struct ClassArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum)]
    pattern_class: PatternClass,
    /// Monotone pattern length minus one (inc, dec).
    #[arg(long)]
    k: Option<usize>,
    /// gf, path, shape or bruteforce; defaults to gf for c321/c231 and shape
    /// for inc/dec.
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
}

fn parse_pattern(s: &str) -> Result<Pattern, String> {
    s.parse().map_err(|e: fpbias::Error| e.to_string())
}

fn parse_real(s: &str) -> Result<Real, String> {
    s.parse().map_err(|e: fpbias::Error| e.to_string())
}

fn parse_theorem(s: &str) -> Result<Theorem, String> {
    s.parse().map_err(|e: fpbias::Error| e.to_string())
}

fn parse_parity(s: &str) -> Result<Parity, String> {
    s.parse().map_err(|e: fpbias::Error| e.to_string())
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse().map_err(|e: fpbias::Error| e.to_string())
}

enum Failure {
    /// Bad flags or a violated guard.
    Usage(String),
    /// A threshold or equivalence check failed.
    Check,
}

impl From<fpbias::Error> for Failure {
    fn from(e: fpbias::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

impl ClassArgs {
    fn subject(&self) -> Result<Subject, Failure> {
        let monotone = |direction| match self.k {
            Some(k) if k >= 1 => Ok(Subject::Monotone { k, direction }),
            _ => Err(Failure::Usage(format!(
                "--pattern-class {} needs --k >= 1",
                self.class_name()
            ))),
        };
        match self.pattern_class {
            PatternClass::C321 => Ok(Subject::Class(SigmaClass::Class321)),
            PatternClass::C231 => Ok(Subject::Class(SigmaClass::Class231)),
            PatternClass::Inc => monotone(Direction::Increasing),
            PatternClass::Dec => monotone(Direction::Decreasing),
        }
    }

    fn engine(&self) -> Engine {
        self.engine.unwrap_or(match self.pattern_class {
            PatternClass::C321 | PatternClass::C231 => Engine::Gf,
            PatternClass::Inc | PatternClass::Dec => Engine::Shape,
        })
    }

    fn class_name(&self) -> &'static str {
        match self.pattern_class {
            PatternClass::C321 => "c321",
            PatternClass::C231 => "c231",
            PatternClass::Inc => "inc",
            PatternClass::Dec => "dec",
        }
    }
}

fn cmd_enumerate(cli: &Cli, n: usize, pattern: &Pattern) -> Result<(), Failure> {
    if n > MAX_BRUTE_FORCE_N {
        return Err(Failure::Usage(format!(
            "n = {n} is above the enumeration limit {MAX_BRUTE_FORCE_N}"
        )));
    }
    let perms = avoiding_involutions(n, pattern)?;
    let text = match cli.format {
        Some(Format::Json) => pretty(&json!({
            "n": n,
            "pattern": pattern.to_string(),
            "count": perms.len(),
            "involutions": perms
                .iter()
                .map(|p| json!({"perm": p.to_string(), "fp": p.fixed_points()}))
                .collect::<Vec<_>>(),
        })),
        Some(Format::Csv) => {
            let mut s = String::from("perm,fp\n");
            for p in &perms {
                s += &format!("{},{}\n", p, p.fixed_points());
            }
            s
        }
        None => {
            let mut s = String::new();
            for p in &perms {
                s += &format!("{} {}\n", p, p.fixed_points());
            }
            s + &format!("count={}\n", perms.len())
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn cmd_weights(cli: &Cli, args: &ClassArgs) -> Result<(), Failure> {
    let subject = args.subject()?;
    let engine = args.engine();
    let w = compute_weights(&subject, engine, args.n)?;
    let text = match cli.format {
        Some(Format::Csv) => {
            let mut buf = Vec::new();
            write_weights_csv(std::iter::once(&w), &mut buf)?;
            String::from_utf8(buf).expect("ascii")
        }
        _ => pretty(&json!({
            "pattern_class": args.class_name(),
            "subject": subject.to_string(),
            "engine": engine.to_string(),
            "rows": w
                .nonzero()
                .map(|(j, c)| json!({"n": args.n, "j": j, "count": c.to_string()}))
                .collect::<Vec<_>>(),
        })),
    };
    emit(cli.out.as_deref(), &text)
}

fn cmd_dist(cli: &Cli, args: &ClassArgs, q: &Real) -> Result<(), Failure> {
    if !q.is_positive() {
        return Err(Failure::Usage(format!("q must be positive, got {q}")));
    }
    let subject = args.subject()?;
    let engine = args.engine();
    let w = compute_weights(&subject, engine, args.n)?;
    let d = biased_distribution(&w, q)?;
    let cells: Vec<(usize, Value)> = match d.probs() {
        Probabilities::Exact(m) => m
            .iter()
            .map(|(&j, p)| (j, Value::String(format_rational(p))))
            .collect(),
        Probabilities::Float(m) => m.iter().map(|(&j, &p)| (j, json!(p))).collect(),
    };
    let text = match cli.format {
        Some(Format::Csv) => {
            let mut s = String::from("j,probability\n");
            for (j, v) in &cells {
                match v {
                    Value::String(p) => s += &format!("{j},{p}\n"),
                    other => s += &format!("{j},{other}\n"),
                }
            }
            s
        }
        _ => {
            let probs: Map<String, Value> =
                cells.into_iter().map(|(j, v)| (j.to_string(), v)).collect();
            pretty(&json!({
                "n": args.n,
                "pattern_class": args.class_name(),
                "subject": subject.to_string(),
                "engine": engine.to_string(),
                "q": q,
                "exact": d.is_exact(),
                "probabilities": probs,
            }))
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn report_path(cli: &Cli, report: &ExperimentReport) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut path = report.spec.default_report_path(now);
        if cli.format == Some(Format::Csv) {
            path.set_extension("csv");
        }
        path
    })
}

fn finish_report(cli: &Cli, report: &ExperimentReport) -> Result<(), Failure> {
    let path = report_path(cli, report);
    let text = match cli.format {
        Some(Format::Csv) => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("ascii")
        }
        _ => report.to_json()?,
    };
    emit(Some(&path), &text)?;
    let mut err = io::stderr().lock();
    for w in &report.warnings {
        writeln!(err, "warning: {w}")?;
    }
    for c in &report.checks {
        let tag = if c.passed { "pass" } else { "FAIL" };
        writeln!(
            err,
            "{tag}: {} = {:.6} (threshold {})",
            c.name, c.value, c.threshold
        )?;
    }
    if let Some(m) = report.mismatches.first() {
        writeln!(
            err,
            "first mismatch: {} at n={}, j={}: expected {}, found {}",
            m.check, m.n, m.j, m.expected, m.found
        )?;
    }
    writeln!(err, "report: {}", path.display())?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_verify(
    cli: &Cli,
    theorem: Theorem,
    q: &Real,
    k: Option<usize>,
    parity: Parity,
    n_list: &[usize],
    samples: usize,
) -> Result<(), Failure> {
    let need_k = || k.ok_or_else(|| Failure::Usage(format!("--theorem {theorem} needs --k")));
    let report = match theorem {
        Theorem::T1 => harness::run_t1(need_k()?, q, parity, n_list)?,
        Theorem::T2 => harness::run_t2(need_k()?, q.to_f64(), n_list, samples, cli.seed)?,
        Theorem::T3a | Theorem::T3b | Theorem::T3c => harness::run_t3(q, n_list)?,
        Theorem::T4 => harness::run_t4(q, n_list)?,
        Theorem::Selftest => {
            return Err(Failure::Usage("use the selftest subcommand".into()));
        }
    };
    finish_report(cli, &report)
}

fn cmd_selftest(
    cli: &Cli,
    fixture: Option<&Path>,
    n_max_poly: usize,
    n_max_path: usize,
) -> Result<(), Failure> {
    let overrides = match fixture {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let table: SeriesTable = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            EngineOverrides::with_gf_table(table)
        }
        None => EngineOverrides::default(),
    };
    let report = cross_engine_check_with(n_max_poly, n_max_path, overrides)?;
    let text = match cli.format {
        Some(Format::Csv) => {
            let mut s = String::from("check,passed\n");
            for c in &report.checks {
                s += &format!("{},{}\n", c.name.replace(',', ";"), c.passed);
            }
            s
        }
        _ => report.to_json()?,
    };
    emit(cli.out.as_deref(), &text)?;
    if let Some(m) = report.mismatches.first() {
        eprintln!(
            "first mismatch: {} at n={}, j={}: expected {}, found {}",
            m.check, m.n, m.j, m.expected, m.found
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Enumerate { n, pattern } => cmd_enumerate(cli, *n, pattern),
        Command::Weights(args) => cmd_weights(cli, args),
        Command::Dist { class, q } => cmd_dist(cli, class, q),
        Command::Verify {
            theorem,
            q,
            k,
            parity,
            n_list,
            samples,
        } => cmd_verify(cli, *theorem, q, *k, *parity, n_list, *samples),
        Command::Selftest {
            fixture,
            n_max_poly,
            n_max_path,
        } => cmd_selftest(cli, fixture.as_deref(), *n_max_poly, *n_max_path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
