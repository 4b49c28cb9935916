use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = canoise_cli::Cli::parse();
    ExitCode::from(canoise_cli::run(&cli, &argv) as u8)
}
