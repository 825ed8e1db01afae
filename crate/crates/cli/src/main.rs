//! `trustcal`: estimate, select, solve, simulate and serve trust/workload
//! POMDP models.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure classes that map to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<trustcal_core::Error> for CliError {
    fn from(e: trustcal_core::Error) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Input(e.to_string())
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose { tracing::Level::DEBUG } else { tracing::Level::WARN })
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
