mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use wavecheck::Error;

use config::ExperimentConfig;

pub const SCHEMA: &str = "wavecheck/1";

#[derive(Parser, Debug)]
#[command(name = "wavecheck", version, about = "Gaussian-wave experiments on random regular graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key=value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the effective configuration to this path.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    #[command(flatten)]
    flags: ExperimentConfig,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sample a random d-regular graph and write its edge list.
    Gen,
    /// Covariance spectrum of the tree wave on balls.
    Wave,
    /// Local statistics of an almost eigenvector.
    AlmostEig,
    /// Entropy identities and inequalities.
    Entropy,
    /// The orthogonal frame behind the eigenvector process.
    Frame,
    /// Lift statistics of the exact eigenvector nearest lambda.
    LiftStats,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Wave => "wave",
            Command::AlmostEig => "almost-eig",
            Command::Entropy => "entropy",
            Command::Frame => "frame",
            Command::LiftStats => "lift-stats",
        }
    }
}

fn configure_threads() -> wavecheck::Result<()> {
    let Ok(raw) = std::env::var("WAVECHECK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("WAVECHECK_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> wavecheck::Result<()> {
    configure_threads()?;
    let base = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.overlay(cli.flags);
    if let Some(path) = &cli.save_config {
        std::fs::write(path, cfg.render())?;
    }
    let result = match cli.command {
        Command::Gen => commands::gen(&cfg)?,
        Command::Wave => commands::wave(&cfg)?,
        Command::AlmostEig => commands::almost_eig(&cfg)?,
        Command::Entropy => commands::entropy(&cfg)?,
        Command::Frame => commands::frame(&cfg)?,
        Command::LiftStats => commands::lift_stats(&cfg)?,
    };
    let report = json!({
        "schema": SCHEMA,
        "command": cli.command.name(),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "config": cfg.to_map(),
        "result": result,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))? + "\n";
    // gen uses --out for the edge list
    match (&cfg.out, cli.command) {
        (Some(path), c) if !matches!(c, Command::Gen) => std::fs::write(path, text)?,
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::OutOfSpectrum { .. } => "out_of_spectrum",
        Error::Parse { .. } => "parse",
        Error::RankMismatch { .. } => "rank_mismatch",
        Error::Numerical(_) => "numerical",
        Error::Precondition(_) => "precondition",
        Error::Generation(_) => "generation",
        Error::Io(_) => "io",
    }
}

fn report_error(kind: &str, message: String, code: u8) -> ExitCode {
    let v: Value = json!({ "schema": SCHEMA, "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{v}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return report_error("usage", e.to_string().trim().to_string(), 2),
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_invalid_input() { 2 } else { 3 };
            report_error(error_kind(&e), e.to_string(), code)
        }
    }
}
