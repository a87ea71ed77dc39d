use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::Parser;
use salem_lab::{Cli, RunConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = RunConfig::resolve(cli.command, &cli.args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().context("starting worker pool")?;
    let outcome = pool.install(|| salem_lab::run(&cfg))?;
    println!("{}: {}", cfg.command.name(), outcome.summary);
    for path in &outcome.artifacts {
        println!("wrote {}", path.display());
    }
    if !outcome.passed {
        eprintln!("{}: bound violated", cfg.command.name());
    }
    Ok(outcome.passed)
}
