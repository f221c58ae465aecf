use std::io;
use std::process::ExitCode;

use clap::Parser;
use invaug::cli::{self, Cli};
use invaug::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli::run(cli, &mut io::stdout().lock()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
