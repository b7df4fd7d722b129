//! Command-line pipeline: config, subcommand dispatch and artifact output.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;

use clap::Parser;
use oilshock::Error;

pub use commands::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Short stable tag for the stderr line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::Io { .. } => "io",
                Error::Parse { .. } | Error::Date(_) | Error::DuplicateDate { .. } => "parse",
                Error::Domain { .. } => "domain",
                Error::Coverage { .. } => "coverage",
                Error::Frequency(_) => "frequency",
                Error::InsufficientSample(_) => "sample",
                Error::Singular(_) | Error::NotPositiveDefinite { .. } => "numeric",
                Error::Unstable { .. } => "unstable",
                Error::UnknownShock(_) => "shock",
                Error::Invalid(_) => "invalid",
                Error::Bootstrap { .. } => "bootstrap",
                Error::Network(_) => "network",
                Error::Serde(_) | Error::Csv(_) => "format",
            },
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Json(_) | CliError::Csv(_) => "format",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// `error[kind]: message`, always on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.kind())
    }
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
