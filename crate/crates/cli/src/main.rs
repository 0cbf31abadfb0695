use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    aqlmr_cli::run(aqlmr_cli::args::Cli::parse())
}
