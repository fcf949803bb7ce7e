use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod io;

use config::{Command, Format, RunConfig, Settings};
use error::CliError;

/// Bootstrap and multiple imputation: pooled analyses and coverage studies.
#[derive(Parser)]
#[command(name = "bootmi", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Impute, resample, analyse and pool a CSV data set.
    Analyze {
        #[command(flatten)]
        shared: Shared,
        /// Input CSV (header row; an empty cell is missing).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Also write the estimate grid for later use with `pool`.
        #[arg(long)]
        save_grid: Option<PathBuf>,
    },
    /// Run a coverage study on a built-in scenario or a scenario JSON file.
    Simulate {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Pool a pre-computed estimate grid.
    Pool {
        #[command(flatten)]
        shared: Shared,
        /// Grid CSV with a `# orientation=...` first line.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Shared {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Two-sided miss rate of the intervals [default: 0.05].
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of imputations.
    #[arg(long)]
    m: Option<usize>,
    /// Number of bootstrap resamples.
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    nsim: Option<usize>,
    /// mi-rubin, mi-boot-rubin, mi-boot-pooled-percentile, boot-mi-percentile or von-hippel.
    #[arg(long)]
    method: Option<String>,
}

impl Shared {
    fn settings(self) -> Result<(Settings, Option<PathBuf>), CliError> {
        let method = self
            .method
            .map(|m| m.parse().map_err(|e: bootmi::Error| CliError::Config(e.to_string())))
            .transpose()?;
        let flags = Settings {
            out: self.out,
            format: self.format,
            seed: self.seed,
            threads: self.threads,
            alpha: self.alpha,
            m: self.m,
            b: self.b,
            nsim: self.nsim,
            method,
            ..Settings::default()
        };
        Ok((flags, self.config))
    }
}

fn resolve(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let (command, shared, extra, save_grid) = match cli.command {
        Cmd::Analyze { shared, data, save_grid } => (
            Command::Analyze,
            shared,
            Settings { data, ..Settings::default() },
            save_grid,
        ),
        Cmd::Simulate { shared, scenario } => (
            Command::Simulate,
            shared,
            Settings { scenario, ..Settings::default() },
            None,
        ),
        Cmd::Pool { shared, grid } => (
            Command::Pool,
            shared,
            Settings { grid, ..Settings::default() },
            None,
        ),
    };
    let (flags, config_path) = shared.settings()?;
    let file = match config_path {
        Some(p) => Settings::from_file(&p)?,
        None => Settings::default(),
    };
    let settings = file.merge(flags).merge(extra);
    Ok((RunConfig { command, settings }, save_grid))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (mut config, save_grid) = resolve(cli)?;
    config.settings.alpha()?;
    if config.command != Command::Pool && config.settings.seed.is_none() {
        let seed = commands::fresh_seed();
        eprintln!("seed: {seed}");
        config.settings.seed = Some(seed);
    }
    if let Some(n) = config.settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    commands::execute(&config, save_grid.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
