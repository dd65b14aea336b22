//! `twisted-eisenstein CONFIG [--strict]`: runs the single command described
//! by a TOML run config and writes its artifact atomically.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or config error,
//! 3 non-saturated result under `--strict`, 4 I/O error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use thiserror::Error;
use twisted_eisenstein::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "twisted-eisenstein", version, about = "Eisenstein series twisted by representations unitary at the cusps")]
struct Args {
    /// TOML run config (group, representation, truncation, output, command).
    config: PathBuf,
    /// Exit with status 3 when any truncation is not saturated.
    #[arg(long)]
    strict: bool,
    /// Validate the config and exit without computing.
    #[arg(long)]
    check: bool,
    /// Override `output.path`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(twisted_eisenstein::Error),
    #[error("computation failed: {0}")]
    Compute(twisted_eisenstein::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not saturated: {0}")]
    NotSaturated(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::NotSaturated(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io { path: args.config.clone(), source })?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!(
            "config file {} is empty\n\n{}",
            args.config.display(),
            Args::command().render_long_help()
        )));
    }
    let mut cfg = RunConfig::from_toml_str(&text).map_err(CliError::Config)?;
    if let Some(p) = args.output {
        cfg.output.path = p;
    }
    if args.check {
        println!("config ok: command `{}`", cfg.command.name());
        return Ok(());
    }
    let group = cfg.build_group().map_err(CliError::Config)?;
    let rep = cfg.build_representation(&group).map_err(CliError::Config)?;
    let art = commands::run(&cfg, &group, &rep).map_err(CliError::Compute)?;
    let saturated = art.saturated;
    let notes = art.notes.clone();
    let hash = output::config_hash(&text);
    let path = cfg.output.path.clone();
    let written = output::emit(&cfg, &hash, art, &path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    for n in &notes {
        eprintln!("note: {n}");
    }
    if args.strict && !saturated {
        return Err(CliError::NotSaturated(notes.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
