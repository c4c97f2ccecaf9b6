mod analyze;
mod commands;
mod config;
mod error;
mod preprocess;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;
use error::CliError;

/// Frequency-domain causal effect analysis of structural vector autoregressions.
#[derive(Debug, Parser)]
#[command(name = "specaus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Analysis configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Confidence level, overriding the config
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of evenly spaced frequencies, overriding the config
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample from the configured model and write it as CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of effective time steps T; the file gets T + q rows
        #[arg(long)]
        length: Option<usize>,
        /// TOML file with a [model] section, replacing the config's model
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Seasonal averaging, mean removal, normalization and differencing
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Least-squares fit of every vertex, written as JSON
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Estimates, confidence intervals and tests for every query
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// JSON output; the CSV table is written with the same stem
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            output,
            seed,
            length,
            model,
        } => {
            let ov = Overrides {
                seed,
                alpha: common.alpha,
                grid: common.grid,
                length,
                model,
            };
            let r = commands::load(&common.config, &ov)?;
            commands::cmd_simulate(&r, &ov, &output)
        }
        Command::Preprocess { common, input, output } => {
            let r = commands::load(&common.config, &overrides(&common))?;
            commands::cmd_preprocess(&r, &input, &output)
        }
        Command::Fit { common, input, output } => {
            let r = commands::load(&common.config, &overrides(&common))?;
            commands::cmd_fit(&r, &input, &output)
        }
        Command::Analyze { common, input, output } => {
            let r = commands::load(&common.config, &overrides(&common))?;
            commands::cmd_analyze(&r, &input, &output)
        }
    }
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        alpha: c.alpha,
        grid: c.grid,
        ..Default::default()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECAUS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
