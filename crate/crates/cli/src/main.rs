mod args;
mod commands;
mod data;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Settings};

fn run(cli: Cli) -> spatial_sign::Result<()> {
    let settings = Settings::resolve(cli)?;
    match settings.command {
        Command::Test => commands::test(&settings),
        Command::Experiment => commands::experiment(&settings),
        Command::Suite => commands::suite(&settings),
        Command::Limits => commands::limits(&settings),
        Command::Kappa4 => commands::kappa4(&settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe, e.g. `| head`
        Err(spatial_sign::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spatial-sign: {e}");
            if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
