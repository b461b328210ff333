use std::path::Path;

use crate::commands::eval::write_results;
use crate::config::{stem, AppConfig};
use crate::error::{CliError, Result};
use crate::report::Results;

/// Re-renders a results file written by `eval` or `compare`. The original
/// header is kept, so the tables come out identical to the first run's.
pub fn run(cfg: &AppConfig, results_path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(results_path)
        .map_err(|e| CliError::input(format!("{}: {e}", results_path.display())))?;
    let results: Results = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", results_path.display())))?;
    for r in &results.rows {
        if r.reports.len() != results.methods.len() {
            return Err(CliError::input(format!(
                "{}: row {} has {} reports for {} methods",
                results_path.display(),
                r.id,
                r.reports.len(),
                results.methods.len()
            )));
        }
    }
    write_results(&cfg.output.dir, &stem(results_path), &results)
}
