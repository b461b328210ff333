use std::path::Path;

use digcount_core::detection::write_detection_stream;
use digcount_core::sim::{generate_stream, stream_seed};
use serde_json::json;

use super::load_scenario;
use crate::artifact::{ensure_dir, write_file, write_jsonl, ArtifactHeader};
use crate::config::AppConfig;
use crate::error::{CliError, Result};

/// Writes `streams/<script>.<noise>.jsonl` for every script and noise model at
/// the given replicate, plus one `truth.jsonl` covering all of them.
pub fn run(cfg: &AppConfig, scenario_path: &Path, replicate: u32) -> Result<String> {
    let table = cfg.table()?;
    let scenario = load_scenario(scenario_path, cfg)?;
    let mut header = ArtifactHeader::new("simulate", &[scenario_path.to_path_buf()], cfg, &table);
    header.extra = json!({ "scenario": scenario, "replicate": replicate });

    let streams = cfg.output.dir.join("streams");
    ensure_dir(&streams)?;
    let mut truth = Vec::new();
    let mut summary = String::new();
    for noise in &scenario.noise {
        for (i, script) in scenario.scripts.iter().enumerate() {
            let seed = stream_seed(noise.seed, replicate, i);
            let generated = generate_stream(script, &noise.with_seed(seed))
                .map_err(|e| CliError::input(format!("{}: {e}", scenario_path.display())))?;
            let id = format!("{}.{}", script.name, noise.name);
            let mut stream_header = generated.header.clone();
            stream_header["video"] = json!(id);
            stream_header["artifact"] = header.to_json();
            write_file(&streams.join(format!("{id}.jsonl")), |out| {
                write_detection_stream(out, Some(&stream_header), &generated.frames)
            })?;
            truth.extend(generated.truth.iter().map(|r| json!({ "video": id, "t": r.completion_time })));
            summary.push_str(&format!(
                "{id}: {} frames, {} workloads, seed {seed}\n",
                generated.frames.len(),
                generated.truth.len()
            ));
        }
    }
    write_jsonl(&cfg.output.dir.join("truth.jsonl"), &header, &truth)?;
    Ok(summary)
}
