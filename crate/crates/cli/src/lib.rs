//! Command-line front end: argument parsing, config files, trace output and
//! command dispatch. `main.rs` only wires these to the process.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::debug;
use mpcc_core::analysis::{compare_to_table1_detailed, verify_lemma_bounds};
use mpcc_core::model::{builtin_problem, check_derivatives, BUILTIN_PROBLEMS, COUNTEREXAMPLE};
use mpcc_core::pipa::SolveStatus;
use mpcc_core::{pipa_solve, trpipa_solve, PipaConfig, SolveOutcome, TraceRecord, TrConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub const CSV_HEADER: [&str; 11] = [
    "k",
    "x",
    "y",
    "w",
    "tau",
    "pred_model",
    "ared_signed",
    "comp",
    "normF",
    "delta",
    "p",
];

/// Parameter names accepted as flags and as config-file keys.
pub const PARAMETERS: [&str; 9] = [
    "c", "sigma", "gamma", "rho", "alpha", "eps-frac", "eps-term", "max-iter", "delta0",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// `--help` or `--version` output.
    #[error("{0}")]
    Info(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    RunPipa,
    RunTrpipa,
    VerifyTable,
    CheckDerivatives,
    VerifyLemma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub problem_name: String,
    /// Keyed by flag name without dashes, e.g. `eps-frac`.
    pub overrides: BTreeMap<String, f64>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Parser, Debug)]
#[command(name = "mpcc", version, about = "Penalty interior-point solvers for MPCCs")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the penalty interior-point method.
    RunPipa(Flags),
    /// Run the trust-region variant.
    RunTrpipa(Flags),
    /// Reproduce the published ten-row run of the counterexample.
    VerifyTable(Flags),
    /// Compare analytic derivatives with finite differences.
    CheckDerivatives(Flags),
    /// Check the inductive bounds over a 50-iteration counterexample run.
    VerifyLemma(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "eps-frac")]
    eps_frac: Option<f64>,
    #[arg(long = "eps-term")]
    eps_term: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// File of `name=value` lines supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn numeric(&self) -> BTreeMap<String, f64> {
        let entries = [
            ("c", self.c),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("eps-frac", self.eps_frac),
            ("eps-term", self.eps_term),
            ("max-iter", self.max_iter.map(|v| v as f64)),
            ("delta0", self.delta0),
        ];
        entries
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }
}

/// Settings read from a config file.
#[derive(Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub numeric: BTreeMap<String, f64>,
    pub problem: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected name=value", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "problem" => cfg.problem = Some(value.to_string()),
            "out" => cfg.out = Some(PathBuf::from(value)),
            "format" => {
                cfg.format = Some(
                    Format::from_str(value, true)
                        .map_err(|_| CliError::Usage(format!("config line {}: unknown format {value:?}", n + 1)))?,
                )
            }
            k if PARAMETERS.contains(&k) => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("config line {}: {k} is not a number: {value:?}", n + 1)))?;
                cfg.numeric.insert(k.to_string(), v);
            }
            other => {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown parameter {other:?}",
                    n + 1
                )))
            }
        }
    }
    Ok(cfg)
}

fn check_ranges(values: &BTreeMap<String, f64>) -> Result<(), CliError> {
    for (k, v) in values {
        let ok = match k.as_str() {
            "sigma" | "gamma" | "rho" | "eps-frac" => *v > 0.0 && *v < 1.0,
            "max-iter" => *v >= 1.0 && v.fract() == 0.0,
            _ => *v > 0.0 && v.is_finite(),
        };
        if !ok {
            let want = match k.as_str() {
                "sigma" | "gamma" | "rho" | "eps-frac" => "in (0, 1)",
                "max-iter" => "a positive integer",
                _ => "positive",
            };
            return Err(CliError::Usage(format!("--{k} must be {want}, got {v}")));
        }
    }
    Ok(())
}

/// Parses arguments without the program name.
pub fn parse_args<S: AsRef<str>>(argv: &[S]) -> Result<RunSpec, CliError> {
    let args = std::iter::once("mpcc").chain(argv.iter().map(|s| s.as_ref()));
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp
        | clap::error::ErrorKind::DisplayVersion
        | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let (command, flags) = match cli.command {
        Sub::RunPipa(f) => (Command::RunPipa, f),
        Sub::RunTrpipa(f) => (Command::RunTrpipa, f),
        Sub::VerifyTable(f) => (Command::VerifyTable, f),
        Sub::CheckDerivatives(f) => (Command::CheckDerivatives, f),
        Sub::VerifyLemma(f) => (Command::VerifyLemma, f),
    };

    let file = match &flags.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => ConfigFile::default(),
    };
    let mut overrides = file.numeric;
    overrides.extend(flags.numeric());
    match command {
        Command::VerifyTable => {
            overrides.entry("max-iter".into()).or_insert(10.0);
        }
        Command::VerifyLemma => {
            overrides.entry("max-iter".into()).or_insert(50.0);
        }
        _ => {}
    }
    check_ranges(&overrides)?;

    let problem_name = flags
        .problem
        .or(file.problem)
        .unwrap_or_else(|| COUNTEREXAMPLE.to_string());
    if !BUILTIN_PROBLEMS.contains(&problem_name.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown problem {problem_name:?}; available: {}",
            BUILTIN_PROBLEMS.join(", ")
        )));
    }
    if matches!(command, Command::VerifyTable | Command::VerifyLemma) && problem_name != COUNTEREXAMPLE {
        return Err(CliError::Usage(format!(
            "this command applies to the {COUNTEREXAMPLE} problem only"
        )));
    }
    let default_format = match command {
        Command::VerifyTable | Command::VerifyLemma | Command::CheckDerivatives => Format::Table,
        _ => Format::Csv,
    };
    Ok(RunSpec {
        command,
        problem_name,
        overrides,
        output_path: flags.out.or(file.out),
        format: flags.format.or(file.format).unwrap_or(default_format),
    })
}

impl RunSpec {
    pub fn pipa_config(&self) -> PipaConfig {
        let mut cfg = PipaConfig::default();
        if matches!(self.command, Command::VerifyLemma) {
            cfg.eps_term = f64::MIN_POSITIVE;
        }
        self.apply(&mut cfg);
        cfg
    }

    pub fn tr_config(&self) -> TrConfig {
        let mut cfg = TrConfig::default();
        self.apply(&mut cfg.base);
        if let Some(d) = self.overrides.get("delta0") {
            cfg.delta0 = *d;
        }
        cfg
    }

    fn apply(&self, cfg: &mut PipaConfig) {
        for (k, v) in &self.overrides {
            match k.as_str() {
                "c" => cfg.c = *v,
                "sigma" => cfg.sigma = *v,
                "gamma" => cfg.gamma = *v,
                "rho" => cfg.rho = *v,
                "alpha" => cfg.alpha = *v,
                "eps-frac" => cfg.eps_frac = *v,
                "eps-term" => cfg.eps_term = *v,
                "max-iter" => cfg.max_iter = *v as usize,
                _ => {}
            }
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn vector(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv<W: Write>(trace: &[TraceRecord], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in trace {
        w.write_record([
            r.k.to_string(),
            vector(&r.point.x),
            vector(&r.point.y),
            vector(&r.point.w),
            opt(r.tau),
            opt(r.pred),
            opt(r.ared),
            num(r.comp),
            num(r.f_norm),
            opt(r.delta),
            r.p_exp.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Eight significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig8(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e4).contains(&a) {
        let decimals = (7 - a.log10().floor() as i32).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.7e}")
    }
}

pub fn write_table<W: Write>(trace: &[TraceRecord], mut out: W) -> Result<(), CliError> {
    let join = |v: &[f64]| v.iter().map(|x| sig8(*x)).collect::<Vec<_>>().join(";");
    writeln!(
        out,
        "{:>4}  {:>16}  {:>16}  {:>16}  {:>16}  {:>16}",
        "k", "x", "y", "w", "pred_model", "ared_signed"
    )?;
    for r in trace {
        writeln!(
            out,
            "{:>4}  {:>16}  {:>16}  {:>16}  {:>16}  {:>16}",
            r.k,
            join(&r.point.x),
            join(&r.point.y),
            join(&r.point.w),
            r.pred.map(sig8).unwrap_or_default(),
            r.ared.map(sig8).unwrap_or_default(),
        )?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(trace: &[TraceRecord], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(trace, out),
        Format::Table => write_table(trace, out),
    }
}

/// One parsed CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub tau: Option<f64>,
    pub pred_model: Option<f64>,
    pub ared_signed: Option<f64>,
    pub comp: f64,
    pub norm_f: f64,
    pub delta: Option<f64>,
    pub p: Option<u32>,
}

impl From<&TraceRecord> for CsvRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            k: r.k,
            x: r.point.x.clone(),
            y: r.point.y.clone(),
            w: r.point.w.clone(),
            tau: r.tau,
            pred_model: r.pred,
            ared_signed: r.ared,
            comp: r.comp,
            norm_f: r.f_norm,
            delta: r.delta,
            p: r.p_exp,
        }
    }
}

fn bad(field: &str, value: &str) -> CliError {
    CliError::Usage(format!("malformed {field} field: {value:?}"))
}

fn parse_f(field: &str, s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| bad(field, s))
}

fn parse_opt(field: &str, s: &str) -> Result<Option<f64>, CliError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f(field, s).map(Some)
    }
}

fn parse_vec(field: &str, s: &str) -> Result<Vec<f64>, CliError> {
    if s.is_empty() {
        return Ok(vec![]);
    }
    s.split(';').map(|t| parse_f(field, t)).collect()
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CliError::Usage(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        rows.push(CsvRow {
            k: f(0).parse().map_err(|_| bad("k", f(0)))?,
            x: parse_vec("x", f(1))?,
            y: parse_vec("y", f(2))?,
            w: parse_vec("w", f(3))?,
            tau: parse_opt("tau", f(4))?,
            pred_model: parse_opt("pred_model", f(5))?,
            ared_signed: parse_opt("ared_signed", f(6))?,
            comp: parse_f("comp", f(7))?,
            norm_f: parse_f("normF", f(8))?,
            delta: parse_opt("delta", f(9))?,
            p: if f(10).is_empty() {
                None
            } else {
                Some(f(10).parse().map_err(|_| bad("p", f(10)))?)
            },
        });
    }
    Ok(rows)
}

fn emit_trace(spec: &RunSpec, trace: &[TraceRecord], stdout: &mut dyn Write) -> Result<(), CliError> {
    match &spec.output_path {
        Some(path) => {
            let file = fs::File::create(path)?;
            write_trace(trace, spec.format, io::BufWriter::new(file))?;
            debug!("wrote {} rows to {}", trace.len(), path.display());
            Ok(())
        }
        None => write_trace(trace, spec.format, stdout),
    }
}

fn status_code(out: &SolveOutcome, stderr: &mut dyn Write) -> io::Result<i32> {
    match &out.status {
        SolveStatus::Failed(e) => {
            writeln!(stderr, "solver error: {e}")?;
            Ok(EXIT_SOLVER)
        }
        SolveStatus::ConvergedSmallStep => Ok(EXIT_OK),
        SolveStatus::MaxIterations => {
            writeln!(stderr, "stopped at the iteration limit")?;
            Ok(EXIT_OK)
        }
    }
}

/// Executes `spec`, writing results to `stdout` (or the output file) and
/// diagnostics to `stderr`. Returns the process exit code.
pub fn run(spec: &RunSpec, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let (problem, start) = builtin_problem(&spec.problem_name)
        .ok_or_else(|| CliError::Usage(format!("unknown problem {:?}", spec.problem_name)))?;
    match spec.command {
        Command::RunPipa => {
            let out = pipa_solve(&problem, &spec.pipa_config(), &start);
            emit_trace(spec, &out.trace, stdout)?;
            Ok(status_code(&out, stderr)?)
        }
        Command::RunTrpipa => {
            let out = trpipa_solve(&problem, &spec.tr_config(), &start);
            emit_trace(spec, &out.trace, stdout)?;
            Ok(status_code(&out, stderr)?)
        }
        Command::VerifyTable => {
            let out = pipa_solve(&problem, &spec.pipa_config(), &start);
            emit_trace(spec, &out.trace, stdout)?;
            if out.failed() {
                return Ok(status_code(&out, stderr)?);
            }
            match compare_to_table1_detailed(&out.trace) {
                Err(e) => {
                    writeln!(stderr, "{e}")?;
                    Ok(EXIT_VERIFICATION)
                }
                Ok(cmp) => {
                    let coord = ["x", "y", "w"][cmp.worst.1];
                    writeln!(
                        stderr,
                        "max relative deviation {:.3e} (row {} {coord}); reduction columns {}",
                        cmp.max_rel_dev,
                        cmp.worst.0,
                        if cmp.reductions_match() { "match" } else { "differ" }
                    )?;
                    let pass = cmp.max_rel_dev <= 1e-6 && cmp.reductions_match();
                    Ok(if pass { EXIT_OK } else { EXIT_VERIFICATION })
                }
            }
        }
        Command::VerifyLemma => {
            let out = pipa_solve(&problem, &spec.pipa_config(), &start);
            if out.failed() {
                return Ok(status_code(&out, stderr)?);
            }
            let report = verify_lemma_bounds(&out.trace);
            let text = match spec.format {
                Format::Csv => report.to_csv(),
                Format::Table => report.to_string(),
            };
            match &spec.output_path {
                Some(path) => fs::write(path, text)?,
                None => stdout.write_all(text.as_bytes())?,
            }
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFICATION })
        }
        Command::CheckDerivatives => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let mut worst = 0.0_f64;
            for _ in 0..10 {
                let u: Vec<f64> = (0..problem.dims().n_vars()).map(|_| rng.gen()).collect();
                let p = problem.interior_point_from_unit(&u);
                match check_derivatives(&problem, &p, 1e-6) {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => {
                        writeln!(stderr, "{e}")?;
                        return Ok(EXIT_SOLVER);
                    }
                }
            }
            writeln!(
                stdout,
                "{}: max relative derivative error {worst:.3e} over 10 points",
                spec.problem_name
            )?;
            Ok(if worst <= 1e-6 { EXIT_OK } else { EXIT_VERIFICATION })
        }
    }
}

/// Parses `argv`, runs the command and maps every failure to an exit code.
pub fn main_with<S: AsRef<str>>(argv: &[S], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let spec = match parse_args(argv) {
        Ok(s) => s,
        Err(CliError::Info(text)) => {
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return EXIT_USAGE;
        }
    };
    match run(&spec, stdout, stderr) {
        Ok(code) => code,
        Err(e @ CliError::Usage(_)) => {
            let _ = writeln!(stderr, "{e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            EXIT_SOLVER
        }
    }
}

/// Reads a trace written by [`write_csv`] from a file.
pub fn read_trace_file(path: &Path) -> Result<Vec<CsvRow>, CliError> {
    read_trace_csv(fs::File::open(path)?)
}
