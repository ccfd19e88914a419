use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = gael_cli::Cli::parse();
    ExitCode::from(gael_cli::run(cli))
}
