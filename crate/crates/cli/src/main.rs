use std::process::ExitCode;

use clap::Parser;
use cvm_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cvm_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
