use std::io::Write;
use std::process::ExitCode;

use asyncrl::cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("asyncrl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
