//! `wifiprox`: file-to-file pipeline stages for proximity detection.

mod commands;
mod repro;

use std::process::ExitCode;

use clap::Parser;

use wifiprox::ErrorKind;

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Io => 2,
                ErrorKind::Validation => 3,
                ErrorKind::Config => 4,
            })
        }
    }
}
