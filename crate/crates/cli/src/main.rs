use std::process::ExitCode;

use clap::Parser;

mod args;
mod run;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match run::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
