use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use tactile_cli::{execute, Cli};

fn main() -> ExitCode {
    // usage errors exit with 1: exit code 2 means "localization failed"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = (|| {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the worker pool")?;
        }
        execute(&cli.command, &mut std::io::stdout().lock())
    })();
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
