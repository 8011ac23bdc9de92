mod cli;
mod commands;
mod config;
mod error;
mod report;
mod specs;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::Cli;
use crate::error::CliResult;

fn run() -> CliResult<()> {
    let args = config::merge(std::env::args_os().skip(1).collect())?;
    let cli = match Cli::try_parse_from(std::iter::once("coarsekit".into()).chain(args)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    };
    let report = commands::run(&cli.command)?;
    if let Some(dir) = &cli.out {
        report::emit_report(&report, dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coarsekit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
