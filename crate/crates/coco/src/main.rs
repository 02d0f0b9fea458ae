use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use coco::config::{apply_overrides, ExperimentConfig};
use coco::experiment::run_experiment;
use coco::{analysis, Error};

#[derive(Parser)]
#[command(name = "coco", about = "Stochastic learning dynamics in co-coercive games", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Dotted-path config override, e.g. `noise.sigma=0.5` (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; defaults to the config's `output_dir` or `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the ensemble.
        #[arg(long, env = "COCO_PARALLELISM")]
        parallelism: Option<usize>,
    },
    /// Check a config and print diagnostics without running anything.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the theoretical constants for a config as JSON.
    Constants {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let value = apply_overrides(value, overrides)?;
    ExperimentConfig::from_value(value)
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::InvalidConfig(_)
        | Error::InvalidGame(_)
        | Error::InvalidSchedule(_)
        | Error::Json(_)
        | Error::DimensionMismatch { .. } => EXIT_INVALID_CONFIG,
        _ => EXIT_ERROR,
    }
}

fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Validate { config, overrides } => match load_config(&config, &overrides) {
            Ok(parsed) => {
                let diagnostics = parsed.validate();
                if diagnostics.is_empty() {
                    println!("ok");
                    EXIT_OK
                } else {
                    for d in &diagnostics {
                        eprintln!("error: {d}");
                    }
                    EXIT_INVALID_CONFIG
                }
            }
            Err(err) => {
                eprintln!("error: {err}");
                exit_for(&err)
            }
        },
        Command::Constants { config, overrides } => {
            let result = load_config(&config, &overrides).and_then(|parsed| {
                let reference = parsed.run_config(0)?;
                let constants = analysis::compute_constants(&reference)?;
                println!("{}", serde_json::to_string_pretty(&constants)?);
                Ok(())
            });
            match result {
                Ok(()) => EXIT_OK,
                Err(err) => {
                    eprintln!("error: {err}");
                    exit_for(&err)
                }
            }
        }
        Command::Run {
            config,
            overrides,
            out,
            parallelism,
        } => {
            let parsed = match load_config(&config, &overrides) {
                Ok(parsed) => parsed,
                Err(err) => {
                    eprintln!("error: {err}");
                    return exit_for(&err);
                }
            };
            let diagnostics = parsed.validate();
            if !diagnostics.is_empty() {
                for d in &diagnostics {
                    eprintln!("error: {d}");
                }
                return EXIT_INVALID_CONFIG;
            }
            let out_dir = out
                .or_else(|| parsed.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let workers = parallelism
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            match run_experiment(&parsed, &out_dir, workers) {
                Ok(outcome) => {
                    let reference = parsed.run_config(0).expect("validated above");
                    print!("{}", outcome.summary(&reference));
                    println!("artifacts written to {}", out_dir.display());
                    if outcome.all_checks_pass() {
                        EXIT_OK
                    } else {
                        eprintln!("error: one or more bound checks failed");
                        EXIT_ERROR
                    }
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    exit_for(&err)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
