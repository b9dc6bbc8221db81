//! `ballvn`: reproducible runs of the von Neumann inequality experiments.
//!
//! Exit codes: 0 success, 1 precondition or configuration error, 2 numerical failure,
//! 3 property violation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod provenance;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ballvn::{ErrorClass, Exec};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{Outcome, Status};
use config::{Command, ConfigError, Overrides, RunConfig};
use provenance::Provenance;

#[derive(Parser)]
#[command(name = "ballvn", version, about = "Von Neumann inequality experiments on the unit ball")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tolerance for property checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Defaults to the `command` key of the config file.
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Args, Default)]
struct SizeArgs {
    /// Number of points or matrix size.
    #[arg(long)]
    n: Option<usize>,
    /// Evaluation budget, trial count or sample count, depending on the command.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Commutation, row-contraction and diagonalizability diagnostics of a tuple.
    Validate,
    /// Joint spectrum from a simultaneous triangularization.
    Spectrum,
    /// Restriction multiplier norm and Pick certificate on a point set.
    PickNorm,
    /// Search for n-point configurations maximizing the restriction norm.
    NpointSearch(SizeArgs),
    /// The three-point instance end to end.
    ThreePointCheck,
    /// Construct g with g(T) = f(T) and a certified norm bound.
    Schur(SizeArgs),
    /// Random von Neumann ratio campaign.
    VnFuzz(SizeArgs),
    /// Best ratios on compressed shifts of growing degree.
    CdnCurve {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Trial polynomials per degree.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Series calculus against the Cauchy integral estimate.
    FcCheck(SizeArgs),
}

impl Cmd {
    fn split(self) -> (Command, SizeArgs, Option<usize>, Option<usize>) {
        match self {
            Cmd::Validate => (Command::Validate, SizeArgs::default(), None, None),
            Cmd::Spectrum => (Command::Spectrum, SizeArgs::default(), None, None),
            Cmd::PickNorm => (Command::PickNorm, SizeArgs::default(), None, None),
            Cmd::NpointSearch(a) => (Command::NpointSearch, a, None, None),
            Cmd::ThreePointCheck => (Command::ThreePointCheck, SizeArgs::default(), None, None),
            Cmd::Schur(a) => (Command::Schur, a, None, None),
            Cmd::VnFuzz(a) => (Command::VnFuzz, a, None, None),
            Cmd::CdnCurve { d, k_max, budget } => (Command::CdnCurve, SizeArgs { n: None, budget }, d, k_max),
            Cmd::FcCheck(a) => (Command::FcCheck, a, None, None),
        }
    }
}

const EXIT_PRECONDITION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("ballvn: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match config::load(cli.config.as_deref()) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_PRECONDITION, e),
    };
    let mut cfg = loaded.config;
    let (command, size, d, k_max) = match cli.command.map(Cmd::split) {
        Some(parts) => parts,
        None => match cfg.command {
            Some(c) => (c, SizeArgs::default(), None, None),
            None => return fail(EXIT_PRECONDITION, "no command given on the command line or in the config"),
        },
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        tol: cli.tol,
        n: size.n,
        budget: size.budget,
        d,
        k_max,
    };
    cfg.apply(command, &overrides);
    if let Err(e) = cfg.validate() {
        return fail(EXIT_PRECONDITION, e);
    }
    let inputs = match commands::resolve_inputs(command, &cfg, &loaded.base_dir) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PRECONDITION, e),
    };
    let provenance = Provenance::new(&cfg, loaded.file_sha256, inputs.sha256.clone());
    let exec = if cfg.threads == 1 { Exec::Sequential } else { Exec::Parallel };

    let clock = Instant::now();
    let result = with_threads(cfg.threads, || commands::execute(command, &cfg, &inputs, exec));
    let outcome = match result {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => {
            let code = match e.class() {
                ErrorClass::Precondition => EXIT_PRECONDITION,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            };
            return fail(code, e);
        }
        Err(e) => return fail(EXIT_PRECONDITION, e),
    };
    eprintln!("ballvn: {} finished in {:.2} s", command.name(), clock.elapsed().as_secs_f64());

    let files = match write_outputs(&cfg, &outcome, &provenance) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_PRECONDITION, format!("cannot write to {}: {e}", cfg.out.display())),
    };
    let (status, code) = match &outcome.status {
        Status::Ok => ("ok", 0),
        Status::Precondition(m) => {
            eprintln!("ballvn: precondition: {m}");
            ("precondition", EXIT_PRECONDITION)
        }
        Status::Violation(m) => {
            eprintln!("ballvn: property violation: {m}");
            ("property-violation", EXIT_VIOLATION)
        }
    };
    let summary = json!({
        "command": command.name(),
        "status": status,
        "exit_code": code,
        "report": outcome.report.summary_json(),
        "files": files,
        "provenance": provenance,
    });
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).expect("JSON values serialize"));
    ExitCode::from(code)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, ConfigError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, ConfigError> {
    Ok(f())
}

fn write_outputs(cfg: &RunConfig, o: &Outcome, provenance: &Provenance) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(&cfg.out)?;
    let stem = o.report.file_stem();
    let mut files = Vec::new();
    let json_path = cfg.out.join(format!("{stem}.json"));
    let body = json!({
        "report": o.report.summary_json(),
        "details": o.details,
        "provenance": provenance,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&body).expect("JSON values serialize"))?;
    files.push(json_path);
    if !o.report.columns.is_empty() {
        let csv_path = cfg.out.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, o.report.to_csv())?;
        files.push(csv_path);
    }
    for (suffix, contents) in &o.extra_files {
        let path = cfg.out.join(format!("{stem}-{suffix}"));
        std::fs::write(&path, contents)?;
        files.push(path);
    }
    Ok(files.into_iter().map(|p| p.display().to_string()).collect())
}
