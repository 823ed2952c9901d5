use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nclab::experiment::{self, default_inequality_config, ExperimentConfig, Mode};
use nclab::Error;

#[derive(Parser)]
#[command(
    name = "nclab",
    version,
    about = "Normal-approximation experiments for nonconventional sums"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kolmogorov distance to the normal across an N grid, with slope fit
    Rate(Common),
    /// Growth of E S_N^2 / N and its limit D^2
    Variance(Common),
    /// Monte Carlo Stein terms R1 and R3
    Stein(Common),
    /// Exact checks of the decoupling and smoothing inequalities
    CheckInequalities(Common),
    /// Return-time tuple counts and their normal approximation
    ReturnTimes(Common),
    /// Neighborhood intervals as CSV
    DumpNeighborhoods(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, mode: Option<Mode>) -> Result<ExperimentConfig, Error> {
    let mut config = match (&common.config, mode) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(Mode::Inequalities)) => default_inequality_config(0, "out"),
        (None, _) => {
            return Err(Error::Config {
                field: "--config".into(),
                message: "this subcommand needs a config file".into(),
            })
        }
    };
    if let Some(mode) = mode {
        if config.mode != mode {
            eprintln!(
                "note: config mode `{}` replaced by `{}`",
                config.mode.name(),
                mode.name()
            );
            config.mode = mode;
        }
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = out.to_string_lossy().into_owned();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    // Exit code 2 is reserved for property violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (common, mode) = match &cli.command {
        Command::Rate(c) => (c, Some(Mode::Rate)),
        Command::Variance(c) => (c, Some(Mode::Variance)),
        Command::Stein(c) => (c, Some(Mode::Stein)),
        Command::CheckInequalities(c) => (c, Some(Mode::Inequalities)),
        Command::ReturnTimes(c) => (c, Some(Mode::ReturnTimes)),
        Command::DumpNeighborhoods(c) => (c, None),
    };
    let config = match load(common, mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if mode.is_none() {
        return match experiment::dump_neighborhoods(&config) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    let result = experiment::run_with_workers(&config, workers);
    match &result {
        Ok(outcome) => {
            eprintln!("{}", outcome.summary);
            for f in &outcome.files {
                println!("{}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(experiment::exit_code(&result) as u8)
}
