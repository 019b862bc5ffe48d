mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lmsv_core::error::Error;

use crate::commands::Ctx;
use crate::config::{ConfigError, ExperimentConfig};
use crate::run::Run;

const EXIT_SCHEMA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_BOUNDARY: u8 = 4;

#[derive(Parser)]
#[command(name = "lmsv-lab", version, about = "Simulate and verify limit theorems for heavy-tailed stochastic volatility models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory of run directories (default: config `out`, else `runs`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (1 runs sequentially). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Treat inconclusive verdicts as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate one path and write it as CSV and/or binary cache.
    Simulate,
    /// Classify the limit regime of a statistic.
    Regime,
    /// Sample covariances of |Y|^p against their quadrature values.
    Cov,
    /// Hermite versus stable dichotomy scan over a Hurst grid.
    Scan,
    /// Run experiment plans; exit 0 only if every verdict matches.
    Verify,
    /// Extremal point patterns: Poisson diagnostics and common-jump test.
    Pointprocess,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Regime => "regime",
            Command::Cov => "cov",
            Command::Scan => "scan",
            Command::Verify => "verify",
            Command::Pointprocess => "pointprocess",
        }
    }
}

enum Failure {
    Config(ConfigError),
    Core(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError::Schema("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Ctx { model: cfg.model.as_ref(), seed, workers: cli.workers, strict: cli.strict || cfg.strict };
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let name = cli.command.name();
    // Check that the section exists before creating a run directory.
    let present = match cli.command {
        Command::Simulate => cfg.simulate.is_some(),
        Command::Regime => cfg.regime.is_some(),
        Command::Cov => cfg.cov.is_some(),
        Command::Scan => cfg.scan.is_some(),
        Command::Verify => cfg.verify.is_some(),
        Command::Pointprocess => cfg.pointprocess.is_some(),
    };
    if !present {
        return Err(ConfigError::Schema(format!("missing [{name}] table")).into());
    }
    if !matches!(cli.command, Command::Verify) {
        cfg.model()?;
    }
    let mut run = Run::start(&out, name, &cfg, seed)?;
    let code = match cli.command {
        Command::Simulate => commands::simulate(&ctx, cfg.section(&cfg.simulate, name)?, &mut run)?,
        Command::Regime => commands::regime(&ctx, cfg.section(&cfg.regime, name)?, &mut run)?,
        Command::Cov => commands::cov(&ctx, cfg.section(&cfg.cov, name)?, &mut run)?,
        Command::Scan => commands::scan(&ctx, cfg.section(&cfg.scan, name)?, &mut run)?,
        Command::Verify => commands::verify(&ctx, cfg.section(&cfg.verify, name)?, &mut run)?,
        Command::Pointprocess => commands::pointprocess(&ctx, cfg.section(&cfg.pointprocess, name)?, &mut run)?,
    };
    eprintln!("outputs in {}", run.dir.display());
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SCHEMA)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Boundary { .. } => EXIT_BOUNDARY,
                Error::InvalidParameter(_) => EXIT_SCHEMA,
                _ => EXIT_RUNTIME,
            })
        }
    }
}
