//! The `rcprobe` command line.
//!
//! Exit codes: 0 success, 1 validation error, 2 backend error,
//! 3 infeasible label balance.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use config::{Cli, Command, RunConfig};

/// Bad flags, paths or inputs.
#[derive(Debug)]
pub struct ValidationError(pub String);

/// The sampled dataset could not be balanced.
#[derive(Debug)]
pub struct InfeasibleBalance(pub String);

/// Some backends failed; the others completed.
#[derive(Debug)]
pub struct BackendFailures(pub Vec<String>);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
impl std::error::Error for ValidationError {}

impl std::fmt::Display for InfeasibleBalance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
impl std::error::Error for InfeasibleBalance {}

impl std::fmt::Display for BackendFailures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "backend failures: {}", self.0.join("; "))
    }
}
impl std::error::Error for BackendFailures {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InfeasibleBalance>().is_some() {
        return 3;
    }
    if err.downcast_ref::<BackendFailures>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rcprobe_core::Error>() {
            return if e.is_backend() { 2 } else { 1 };
        }
    }
    1
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(cli)?;
    match cfg.command {
        config::CommandKind::BuildDataset => commands::build_dataset(&cfg),
        config::CommandKind::Probe => commands::probe(&cfg),
        config::CommandKind::Diagnose => commands::diagnose(&cfg),
        config::CommandKind::Cloze => commands::cloze(&cfg),
        config::CommandKind::Report => report::report(&cfg),
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
