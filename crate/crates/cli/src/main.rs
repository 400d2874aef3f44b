use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bitflip_cli::Cli::parse();
    match bitflip_cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
