use std::io;
use std::process::ExitCode;

use cfsig_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // Usage errors exit 1, keeping 2 for mismatches and intrusions.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut stdout = io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
