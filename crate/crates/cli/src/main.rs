use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use wedgeq_cli::{error_json, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
