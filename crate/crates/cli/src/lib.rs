//! Command-line front end: dataset and curve CSV ingestion, model
//! documents, and subcommands over the mixreg crates.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod document;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches, Parser};

pub use commands::Cli;
pub use document::{ModelDocument, Num};
pub use error::{CliError, Result};

fn parse(argv: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let strict = Cli::command().try_get_matches_from(argv.clone());
    // required flags may come from the config file, so find it leniently
    let lenient = Cli::command()
        .ignore_errors(true)
        .mut_subcommands(|s| s.ignore_errors(true))
        .try_get_matches_from(argv.clone());
    let config = lenient
        .as_ref()
        .ok()
        .and_then(|m| m.get_one::<std::path::PathBuf>("config").cloned());
    let Some(config) = config else {
        return Cli::from_arg_matches(&strict?);
    };
    let matches = lenient.expect("config was found");
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Cli::from_arg_matches(&strict?);
    };
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(name).expect("matched subcommand exists");
    let extra = config::config_args(&config, sub, sub_matches)
        .map_err(|e| clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{e}\n")))?;
    let mut full = argv;
    full.extend(extra);
    Cli::try_parse_from(full)
}

/// Runs the CLI on `argv` and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
