//! Command-line front end for `harvest-core`.
//!
//! ```text
//! harvest <eig|solve|branch|verify|lambda-star|perturb|sweep> --config <path> [--out <dir>]
//! ```
//!
//! Exit codes: 0 ok, 2 configuration, 3 numeric failure, 4 partial branch,
//! 5 verification failure. `HARVEST_THREADS` caps the worker count of the
//! commands that run independent traces in parallel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;

pub use config::RunConfig;

#[derive(Debug, Clone)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Partial(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::Partial(_) => 4,
            CliError::Verification(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Partial(m) => write!(f, "partial result: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<harvest_core::Error> for CliError {
    fn from(e: harvest_core::Error) -> Self {
        match e {
            harvest_core::Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Eig,
    Solve,
    Branch,
    Verify,
    LambdaStar,
    Perturb,
    Sweep,
}

#[derive(Debug, Parser)]
#[command(
    name = "harvest",
    version,
    about = "Branches and diagnostics for logistic problems with boundary harvesting"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("harvest: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Eig => commands::eig(&cfg, &cli.out),
        Command::Solve => commands::solve(&cfg, &cli.out),
        Command::Branch => commands::branch(&cfg, &cli.out),
        Command::Verify => commands::verify(&cfg, &cli.out),
        Command::LambdaStar => commands::lambda_star(&cfg, &cli.out),
        Command::Perturb => commands::perturb(&cfg, &cli.out),
        Command::Sweep => commands::sweep(&cfg, &cli.out),
    }
}

/// Worker count: `HARVEST_THREADS` if set and positive, else the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var("HARVEST_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `items` on up to [`worker_count`] threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("worker result")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<u64> = (0..50).collect();
        assert_eq!(parallel_map(&v, |x| x * x), v.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numeric(String::new()).exit_code(), 3);
        assert_eq!(CliError::Partial(String::new()).exit_code(), 4);
        assert_eq!(CliError::Verification(String::new()).exit_code(), 5);
    }
}
