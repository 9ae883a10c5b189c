mod args;
mod commands;
mod provenance;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(#[from] rotwave::Error),
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(e) if e.is_io() => 3,
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if cli.format_version != 1 {
        return Err(CliError::Usage(format!(
            "unsupported --format-version {}; this build writes version 1",
            cli.format_version
        )));
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| rotwave::Error::Io {
        path: cli.out_dir.clone(),
        source: e,
    })?;
    let ctx = Context {
        out_dir: &cli.out_dir,
        format_version: cli.format_version,
        seed: cli.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.workers)))?;
    pool.install(|| match &cli.command {
        Command::Build(a) => commands::build(&ctx, a),
        Command::Observe(a) => commands::observe(&ctx, a),
        Command::Evolve(a) => commands::evolve_cmd(&ctx, a),
        Command::Schedule(a) => commands::schedule_cmd(&ctx, a),
        Command::Fractions(a) => commands::fractions(&ctx, a),
        Command::Carpet(a) => commands::carpet_cmd(&ctx, a),
        Command::Snapshot(a) => commands::snapshot_cmd(&ctx, a),
        Command::CeIngest(a) => commands::ce_ingest(&ctx, a),
        Command::FitLevels(a) => commands::fit_levels(&ctx, a),
        Command::Replay(a) => commands::replay(&ctx, a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rotwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
