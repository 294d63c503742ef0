use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = nmcrc_cli::Cli::parse();
    match nmcrc_cli::execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
