mod args;
mod commands;
mod config;
mod plot;
mod rundir;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::config::AuditConfig;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = AuditConfig::resolve(&cli.flags).and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(summary) => {
            println!("{}: {summary}", cli.command.name());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e:#}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
