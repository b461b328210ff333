//! `digcount`: count excavator workloads from detection streams, score them
//! against ground truth and compare business logics on simulated suites.

mod artifact;
mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{AppConfig, Overrides, PresetChoice};
use error::Result;

#[derive(Parser)]
#[command(name = "digcount", version, about = "Excavator workload counting from object detections")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed from which every scenario noise seed is derived.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Transition table file.
    #[arg(long, global = true)]
    table: Option<PathBuf>,
    /// Compare the state machine against one heuristic preset only.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetChoice>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count workloads in one detection stream and write its traces.
    Count { detections: PathBuf },
    /// Score every method against ground truth, per video.
    Eval {
        truth: PathBuf,
        /// Detection files or directories of `*.jsonl` files.
        #[arg(required = true)]
        detections: Vec<PathBuf>,
    },
    /// Run the state machine and heuristics over a simulated scenario suite.
    Compare { scenario: PathBuf },
    /// Write the detection streams and ground truth of a scenario.
    Simulate {
        scenario: PathBuf,
        /// Seed replicate to generate.
        #[arg(long, default_value_t = 0)]
        replicate: u32,
    },
    /// Re-render tables from an `eval.json` or `compare.json` file.
    Report { results: PathBuf },
}

fn run(cli: Cli) -> Result<String> {
    let overrides = Overrides {
        config: cli.config,
        seed: cli.seed,
        table: cli.table,
        preset: cli.preset,
        out: cli.out,
    };
    let cfg = AppConfig::load(&overrides)?;
    env_logger::Builder::new()
        .parse_filters(&cfg.log.level)
        .format_timestamp(None)
        .init();
    match &cli.command {
        Command::Count { detections } => commands::count::run(&cfg, detections),
        Command::Eval { truth, detections } => commands::eval::run(&cfg, truth, detections),
        Command::Compare { scenario } => commands::compare::run(&cfg, scenario),
        Command::Simulate { scenario, replicate } => commands::simulate::run(&cfg, scenario, *replicate),
        Command::Report { results } => commands::report::run(&cfg, results),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("digcount: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
