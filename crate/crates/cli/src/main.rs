use std::process::ExitCode;

use clap::Parser;
use s3_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match s3_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
