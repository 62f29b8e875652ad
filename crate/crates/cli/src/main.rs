use std::process::ExitCode;

use clap::Parser;
use influence_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) if outcome.failures.is_empty() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} team(s) failed:", outcome.failures.len());
            for f in &outcome.failures {
                eprintln!("  {}: {}", f.team, f.error);
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
