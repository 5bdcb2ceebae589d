//! `srlift`: synthesize data, train and evaluate lifting networks, rank rare
//! poses, count parameters and merge metric reports.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use commands::Cli;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let argv = match config::expand(&cmd, &argv) {
        Ok(Some(expanded)) => expanded,
        Ok(None) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match cmd
        .try_get_matches_from(&argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match commands::run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
