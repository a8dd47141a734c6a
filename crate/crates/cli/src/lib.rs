//! Experiment runner for the `mvchain` library.
//!
//! Each subcommand writes CSV tables and JSON reports into `--out`. Runs with
//! the same configuration and seed produce byte-identical files whatever the
//! thread count. Exit status is 0 on success, 1 when a computation failed
//! (failed items are listed in `errors.json`) and 2 on usage errors.

pub mod args;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod spec;

use std::ffi::OsString;

use anyhow::{Context as _, Result};
use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::Context;
use crate::output::{ErrorReport, Failure, OutDir};

/// A problem with the requested configuration rather than with the
/// computation; reported with [`EXIT_USAGE`].
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new($crate::UsageError(format!($($arg)*))))
    };
}
pub(crate) use usage;

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<UsageError>() || matches!(c.downcast_ref::<mvchain::Error>(), Some(mvchain::Error::Parameter(_))))
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn dispatch(cli: &Cli, out: &mut OutDir) -> Result<Vec<Failure>> {
    let mut ctx = Context {
        seed: cli.global.seed,
        timing: cli.global.timing,
        out,
    };
    match &cli.command {
        Command::SimulateChain(a) => commands::simulate(a, &mut ctx),
        Command::Moments(a) => commands::moments(a, &mut ctx),
        Command::Diagnose(a) => commands::diagnose(a, &mut ctx),
        Command::Newton(a) => commands::newton(a, &mut ctx),
        Command::Example1(a) => commands::example1(a, &mut ctx),
        Command::Example2(a) => commands::example2(a, &mut ctx),
        Command::Example3(a) => commands::example3(a, &mut ctx),
    }
}

fn needs_seed(cmd: &Command) -> Option<&'static str> {
    match cmd {
        Command::SimulateChain(_) => Some("simulate-chain"),
        Command::Example1(_) => Some("example1"),
        Command::Example2(_) => Some("example2"),
        Command::Example3(_) => Some("example3"),
        _ => None,
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut out = OutDir::create(&cli.global.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let failures = pool.install(|| dispatch(cli, &mut out))?;
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    for f in &failures {
        eprintln!("failed: {}: {}", f.item, f.message);
    }
    out.json(
        "errors.json",
        &ErrorReport {
            failed: failures.len(),
            errors: &failures,
        },
    )?;
    Ok(EXIT_FAILURE)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version land here too
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let (Some(name), None) = (needs_seed(&cli.command), cli.global.seed) {
        eprintln!("error: {name} needs --seed");
        return EXIT_USAGE;
    }
    if cli.global.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return EXIT_USAGE;
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}
