//! Argument parsing and command dispatch. Exit codes: 0 for pass,
//! membership or compatibility; 1 for their negation; 2 for usage and
//! input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cloneforge_core::catalog::{self, LatticeReport};
use cloneforge_core::closure::DEFAULT_BUDGET;
use cloneforge_core::verify::{self, HarnessReport, DEFAULT_SAMPLES};
use cloneforge_core::{ClosureCache, ClosureOptions, Congruence};
use serde::Serialize;

use crate::format::{self, FormatError};

#[derive(Debug, Parser)]
#[command(name = "cloneforge", version, about = "Clones of finitary operations on Z_n")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Maximum number of explicitly stored closure members.
    #[arg(long, global = true, env = "CLONEFORGE_BUDGET")]
    pub budget: Option<usize>,
    /// Worker threads for closure evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout. For `closure`, the member export.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an operation table against every congruence of its ring.
    CheckCompat { op_file: String },
    /// Compute the m-ary part of a generated clone.
    Closure {
        /// Generator file, or `catalog:NAME` for a catalog clone on Z_{p^2}.
        gens: String,
        #[arg(long)]
        arity: u32,
        #[arg(long, default_value_t = 2)]
        p: u32,
    },
    /// Decide whether an operation lies in a generated clone.
    Member {
        gens: String,
        op_file: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
    },
    /// Decide whether the clone generated by `small` lies in the one generated by `big`.
    Includes {
        big: String,
        small: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
    },
    /// Run a verification harness.
    Verify {
        #[arg(value_enum)]
        harness: Harness,
        #[command(flatten)]
        params: VerifyParams,
    },
    Report {
        #[command(subcommand)]
        what: ReportKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Harness {
    #[value(name = "G")]
    G,
    Decomp,
    Star,
    Crt,
    Ck,
    Zp2,
    Catalog,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyParams {
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// Exponent of the ring Z_{p^k} (default 2, or 3 for `ck`).
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    #[arg(long, default_value_t = 3)]
    pub n: u32,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub caps: CatalogCaps,
}

#[derive(Debug, Clone, Args)]
pub struct CatalogCaps {
    /// Largest index j of the E_j and N_j families.
    #[arg(long, default_value_t = 4)]
    pub max_j: u32,
    /// Largest arity whose closures decide lattice verdicts.
    #[arg(long, default_value_t = 4)]
    pub arity_cap: u32,
}

#[derive(Debug, Subcommand)]
pub enum ReportKind {
    /// Decide every inclusion between catalog clones on Z_{p^2}.
    Lattice {
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[command(flatten)]
        caps: CatalogCaps,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] cloneforge_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Format(e.into())
    }
}

/// A rendered result and its exit code.
pub struct Outcome {
    pub body: String,
    pub code: i32,
}

#[derive(Serialize)]
struct DivisorVerdict {
    divisor: u32,
    preserved: bool,
}

#[derive(Serialize)]
struct CompatReport {
    modulus: u32,
    arity: u32,
    compatible: bool,
    divisors: Vec<DivisorVerdict>,
}

#[derive(Serialize)]
struct ClosureSummary {
    spec_name: String,
    modulus: u32,
    arity: u32,
    generator_names: Vec<String>,
    count: String,
    complete: bool,
    saturated: bool,
    rounds: u32,
}

#[derive(Serialize)]
struct MemberReport {
    spec_name: String,
    modulus: u32,
    arity: u32,
    member: bool,
}

#[derive(Serialize)]
struct IncludesReport {
    big: String,
    small: String,
    included: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn exit_code(ok: bool) -> i32 {
    if ok {
        0
    } else {
        1
    }
}

impl RunConfig {
    pub fn options(&self) -> ClosureOptions {
        ClosureOptions::default().with_budget(self.budget.unwrap_or(DEFAULT_BUDGET))
    }

    fn render(&self, value: &impl Serialize, text: impl FnOnce() -> String) -> String {
        match self.format {
            Format::Json => to_json(value),
            Format::Text => text(),
        }
    }
}

fn check_compat(run: &RunConfig, op_file: &str) -> Result<Outcome, CliError> {
    let t = format::load_table(op_file)?;
    let modulus = t.modulus();
    let mut divisors = Vec::new();
    for d in modulus.divisors() {
        if d != 1 && d != modulus.n() {
            let preserved = t.preserves_congruence(&Congruence::new(modulus, d)?)?;
            divisors.push(DivisorVerdict { divisor: d, preserved });
        }
    }
    let report = CompatReport {
        modulus: modulus.n(),
        arity: t.arity(),
        compatible: divisors.iter().all(|d| d.preserved),
        divisors,
    };
    let body = run.render(&report, || {
        let mut s = format!("Z_{} arity {}: {}\n", report.modulus, report.arity, verdict_word(report.compatible, "compatible", "incompatible"));
        for d in &report.divisors {
            s.push_str(&format!("  mod {}: {}\n", d.divisor, verdict_word(d.preserved, "preserved", "violated")));
        }
        s
    });
    Ok(Outcome { body, code: exit_code(report.compatible) })
}

fn verdict_word(ok: bool, yes: &'static str, no: &'static str) -> &'static str {
    if ok {
        yes
    } else {
        no
    }
}

fn closure(run: &RunConfig, gens: &str, arity: u32, p: u32) -> Result<Outcome, CliError> {
    let spec = format::load_spec(gens, p)?;
    let opts = run.options();
    let part = cloneforge_core::closure_part(&spec, arity, &opts)?;
    if let Some(path) = &run.output {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        format::export_closure(&part, opts.budget, &mut file)?;
        file.flush()?;
    }
    let summary = ClosureSummary {
        spec_name: part.spec_name.clone(),
        modulus: part.modulus.n(),
        arity,
        generator_names: part.generator_names.clone(),
        count: part.count().to_string(),
        complete: part.complete,
        saturated: part.saturated,
        rounds: part.rounds,
    };
    let body = run.render(&summary, || {
        format!(
            "{} on Z_{}, arity {}: {} members, {}\n",
            summary.spec_name,
            summary.modulus,
            arity,
            summary.count,
            verdict_word(summary.complete, "complete", "incomplete")
        )
    });
    Ok(Outcome { body, code: 0 })
}

fn member(run: &RunConfig, gens: &str, op_file: &str, p: u32) -> Result<Outcome, CliError> {
    let spec = format::load_spec(gens, p)?;
    let f = format::load_table(op_file)?;
    let is_member = cloneforge_core::member(&spec, &f, &run.options())?;
    let report = MemberReport { spec_name: spec.name.clone(), modulus: f.modulus().n(), arity: f.arity(), member: is_member };
    let body = run.render(&report, || format!("{}: {}\n", report.spec_name, verdict_word(is_member, "in", "not in")));
    Ok(Outcome { body, code: exit_code(is_member) })
}

fn includes(run: &RunConfig, big: &str, small: &str, p: u32) -> Result<Outcome, CliError> {
    let big = format::load_spec(big, p)?;
    let small = format::load_spec(small, p)?;
    let mut cache = ClosureCache::new(run.options());
    let included = cache.includes(&big, &small)?;
    let mut witness = None;
    if !included {
        for g in small.generators() {
            if !cache.member(&big, &g.table)? {
                witness = Some(g.name.clone());
                break;
            }
        }
        if witness.is_none() {
            witness = Some("a constant".to_string());
        }
    }
    let report = IncludesReport { big: big.name.clone(), small: small.name.clone(), included, witness };
    let body = run.render(&report, || match &report.witness {
        None => format!("{} <= {}\n", report.small, report.big),
        Some(w) => format!("{} is not contained in {} (witness {w})\n", report.small, report.big),
    });
    Ok(Outcome { body, code: exit_code(included) })
}

fn run_harness(run: &RunConfig, harness: Harness, params: &VerifyParams) -> Result<HarnessReport, CliError> {
    let opts = run.options();
    let p = params.p;
    let report = match harness {
        Harness::G => verify::verify_g(p, params.k.unwrap_or(2))?,
        Harness::Decomp => verify::verify_decomp(p, params.k.unwrap_or(2), run.seed, params.samples)?,
        Harness::Star => verify::verify_star(p, params.k.unwrap_or(2), run.seed, params.samples)?,
        Harness::Crt => verify::verify_crt(params.m, params.n, run.seed, params.samples)?,
        Harness::Ck => verify::verify_ck(p, params.k.unwrap_or(3), params.caps.max_j, &mut ClosureCache::new(opts))?,
        Harness::Zp2 => verify::verify_zp2(p, run.seed, params.samples, &opts)?,
        Harness::Catalog => {
            verify::verify_catalog(p, params.caps.max_j, params.caps.arity_cap, &mut ClosureCache::new(opts))?
        }
    };
    Ok(report)
}

fn lattice(run: &RunConfig, p: u32, caps: &CatalogCaps) -> Result<LatticeReport, CliError> {
    Ok(catalog::lattice_report(p, caps.max_j, caps.arity_cap, &mut ClosureCache::new(run.options()))?)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let run = &cli.run;
    match &cli.command {
        Command::CheckCompat { op_file } => check_compat(run, op_file),
        Command::Closure { gens, arity, p } => closure(run, gens, *arity, *p),
        Command::Member { gens, op_file, p } => member(run, gens, op_file, *p),
        Command::Includes { big, small, p } => includes(run, big, small, *p),
        Command::Verify { harness, params } => {
            let report = run_harness(run, *harness, params)?;
            Ok(Outcome { body: run.render(&report, || report.render_text()), code: exit_code(report.pass) })
        }
        Command::Report { what: ReportKind::Lattice { p, caps } } => {
            let report = lattice(run, *p, caps)?;
            Ok(Outcome { body: run.render(&report, || report.render_text()), code: 0 })
        }
    }
}

fn execute_with_threads(cli: &Cli) -> Result<Outcome, CliError> {
    match cli.run.threads {
        None => execute(cli),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".to_string())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| execute(cli))
        }
    }
}

/// Parses `args`, runs the command, and writes the result. Returns the exit code.
pub fn run_from<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let outcome = execute_with_threads(&cli).and_then(|o| {
        let to_file = cli.run.output.as_ref().filter(|_| !matches!(cli.command, Command::Closure { .. }));
        match to_file {
            Some(path) => std::fs::write(path, &o.body)?,
            None => stdout.write_all(o.body.as_bytes())?,
        }
        Ok(o.code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}
