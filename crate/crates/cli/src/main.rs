//! `gradflow`: run, validate and inspect generalized JKO computations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradflow::par;
use gradflow_cli::commands::{cmd_prox_check, cmd_run, cmd_validate};
use gradflow_cli::report::cmd_report;

#[derive(Parser)]
#[command(
    name = "gradflow",
    version,
    about = "Gradient flows with general transport costs"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolution described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run a built-in validation scenario and check its thresholds.
    Validate {
        preset: String,
        /// Report directory (default `validation/<preset>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Compare the closed-form prox with a brute-force minimiser.
    ProxCheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Summarise the output directory of `run` or `validate`.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    par::configure_from_env();
    let result = match cli.command {
        Command::Run { config, out, quiet } => cmd_run(&config, out, quiet),
        Command::Validate { preset, out, quiet } => cmd_validate(&preset, out, quiet),
        Command::ProxCheck { samples } => cmd_prox_check(samples, cli.seed),
        Command::Report { dir } => cmd_report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
