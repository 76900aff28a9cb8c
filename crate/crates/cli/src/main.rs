mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;

/// Why a subcommand stopped; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Core(softblend::Error),
    MissingInput(PathBuf),
}

impl From<softblend::Error> for Failure {
    fn from(e: softblend::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use softblend::Error::*;
        match self {
            Failure::MissingInput(_) => 1,
            Failure::Core(e) => match e {
                Config(_) | InvalidArgument(_) | VersionMismatch { .. } | MalformedFile { .. } | FingerprintMismatch { .. } => 1,
                IllConditioned { .. } | OptimizationFailed(_) | SingularConfiguration { .. } | Divergence { .. } => 2,
                Io { .. } => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::MissingInput(p) => write!(f, "input file {} does not exist", p.display()),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
