//! `snml`: command-line front end for `snml-core`.
//!
//! Exit status: 0 on success, 1 when a check's verdict contradicts
//! `--expect`, 2 on usage or configuration errors (including arguments the
//! library rejects), 3 when a numerical computation fails.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Why a command did not succeed, with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(snml_core::Error),
    Unexpected(String),
    Io(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Unexpected(_) => 1,
            Failure::Usage(_) | Failure::Io(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<snml_core::Error> for Failure {
    fn from(e: snml_core::Error) -> Self {
        match e {
            snml_core::Error::InvalidSpec(_)
            | snml_core::Error::UnsupportedPoint { .. }
            | snml_core::Error::EmptyWindow
            | snml_core::Error::Domain(_)
            | snml_core::Error::HorizonTooLarge { .. }
            | snml_core::Error::NonMonotone(_) => Failure::Usage(e.to_string()),
            other => Failure::Numeric(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Numeric(e) => eprintln!("error: {e}"),
                Failure::Unexpected(msg) => eprintln!("{msg}"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
