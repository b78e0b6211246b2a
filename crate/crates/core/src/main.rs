use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match authordyn::cli::execute(authordyn::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
