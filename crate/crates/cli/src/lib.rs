//! `qsl` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 numerical failure, 3 budget exceeded.

pub mod args;
mod commands;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

use qsl_core::QslError;

use args::{Cli, Command, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(QslError),
    /// Work stopped at the deadline; partial output was written.
    Budget(String),
    /// The self-test found failing invariants.
    Failed(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<QslError> for CliError {
    fn from(e: QslError) -> Self {
        match e {
            QslError::BudgetExceeded(msg) => CliError::Budget(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Failed(_) => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                QslError::InvalidArgument(_)
                | QslError::DimensionMismatch(_)
                | QslError::Io(_)
                | QslError::Serialization(_) => EXIT_USAGE,
                QslError::BudgetExceeded(_) => EXIT_BUDGET,
                QslError::Numerical(_)
                | QslError::DegenerateObjective(_)
                | QslError::Unreachable(_) => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

/// Parses `argv` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("qsl: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let settings = Settings::resolve(command.flags())?;
    let threads = settings.jobs;
    let pool = qsl_core::worker_pool(threads)?;
    pool.install(|| match command {
        Command::Bound(_) => commands::bound(&settings),
        Command::Mintime(_) => commands::mintime(&settings),
        Command::Surface(_) => commands::surface(&settings),
        Command::Selftest(_) => commands::selftest(&settings),
    })
}
