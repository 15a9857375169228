mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};

/// Exit status for invalid invocations, unreadable or malformed input.
const EXIT_USAGE: u8 = 1;
/// Exit status when a numerical routine fails.
const EXIT_NUMERICAL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
        return ExitCode::from(EXIT_USAGE);
    }

    let result = match &cli.command {
        Command::Flow(a) => commands::flow(a),
        Command::Spectrum(a) => commands::spectrum_cmd(a),
        Command::Filter(a) => commands::filter(a),
        Command::Rdmd(a) => commands::rdmd(a),
        Command::Kmd(a) => commands::kmd(a),
        Command::Flow2d(a) => commands::flow2d(a),
        Command::Bands2d(a) => commands::bands2d(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}
