pub mod compare;
pub mod count;
pub mod eval;
pub mod report;
pub mod simulate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use digcount_core::detection::DetectionReader;
use digcount_core::fsm::TransitionTable;
use digcount_core::pipeline::{count_stream, CountResult, Method, PipelineError};
use digcount_core::sim::Scenario;

use crate::config::AppConfig;
use crate::error::{CliError, Result};

/// The state machine followed by the configured heuristic presets.
pub fn methods(cfg: &AppConfig, table: &TransitionTable) -> Vec<Method> {
    std::iter::once(Method::Fsm { table: *table })
        .chain(cfg.heuristics().into_iter().map(|config| Method::Heuristic { config }))
        .collect()
}

pub fn pipeline_error(path: &Path, e: PipelineError) -> CliError {
    match e {
        PipelineError::Config(c) => CliError::config(c),
        other => CliError::input(format!("{}: {other}", path.display())),
    }
}

/// Counts one detection file; also returns the stream header if present.
pub fn count_file(
    path: &Path,
    cfg: &AppConfig,
    table: &TransitionTable,
) -> Result<(CountResult, Option<serde_json::Value>)> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut reader = DetectionReader::new(BufReader::new(file), cfg.filter.fps);
    let result = count_stream(reader.by_ref(), &cfg.pipeline(), table).map_err(|e| pipeline_error(path, e))?;
    Ok((result, reader.header().cloned()))
}

/// Loads a scenario and applies the configured seed, if any.
pub fn load_scenario(path: &Path, cfg: &AppConfig) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::from_toml(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cfg.seed {
        scenario.reseed(seed);
    }
    Ok(scenario)
}
