//! `kgeo`: batch front end for the k-geodesic toolkit.

mod args;
mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::Cli;

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(kgeodesic::Error),
    Io(std::io::Error),
}

impl From<kgeodesic::Error> for Failure {
    fn from(e: kgeodesic::Error) -> Self {
        match e {
            kgeodesic::Error::Parse(msg) => Failure::Usage(msg),
            other => Failure::Domain(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match args::merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            print_subcommand_help(&argv);
            return ExitCode::from(1);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            print_subcommand_help(&argv);
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn print_subcommand_help(argv: &[String]) {
    let mut cmd = Cli::command();
    let name = argv.iter().skip(1).find(|a| !a.starts_with('-'));
    let help = match name.and_then(|n| cmd.find_subcommand_mut(n)) {
        Some(sub) => sub.render_help(),
        None => cmd.render_help(),
    };
    eprintln!("\n{help}");
}
