mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::debug;

use commands::{Context, Format, Output};
use config::RunConfig;
use error::CliError;

/// Three-level open-system simulator: dynamics, steady states and limit scans.
#[derive(Parser, Debug)]
#[command(name = "thermlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run config (or a bare parameter object).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Artifact path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for random initial states; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Time evolution of the reduced density matrix.
    Evolve,
    /// Asymptotic state and its classification.
    Steady,
    /// Steady state along both orders of the T → 0, Δ → 0 limits.
    SsbScan,
    /// Steady-state entropy on a Δ × T grid.
    EntropySurface,
    /// Closed-form zero-temperature state of the degenerate Λ system.
    Antitherm,
    /// Exact single-excitation bath model against the master equation.
    MicroCompare,
    /// Check the parameters.
    Validate,
    /// Generator and Bloch matrices.
    DumpGenerator,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::SsbScan => "ssb-scan",
            Command::EntropySurface => "entropy-surface",
            Command::Antitherm => "antitherm",
            Command::MicroCompare => "micro-compare",
            Command::Validate => "validate",
            Command::DumpGenerator => "dump-generator",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Evolve | Command::EntropySurface | Command::MicroCompare => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)?.with_seed(cli.seed)
}

fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let config = load_config(cli)?;
    debug!("resolved config: {config:?}");
    let ctx = Context { command: cli.command.name(), config: &config, format: cli.format.unwrap_or(cli.command.default_format()) };
    match cli.command {
        Command::Evolve => commands::evolve(&ctx),
        Command::Steady => commands::steady(&ctx),
        Command::SsbScan => commands::ssb_scan(&ctx),
        Command::EntropySurface => commands::entropy_surface_cmd(&ctx),
        Command::Antitherm => commands::antitherm(&ctx),
        Command::MicroCompare => commands::micro_compare(&ctx),
        Command::Validate => commands::validate(&ctx),
        Command::DumpGenerator => commands::dump_generator(&ctx),
    }
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn write(cli: &Cli, output: Output) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, output.primary)?;
            if let Some(summary) = output.summary {
                std::fs::write(summary_path(path), summary)?;
            }
        }
        None => print!("{}", output.primary),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let output = pool.install(|| dispatch(cli))?;
    write(cli, output)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THERMLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
