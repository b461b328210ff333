use std::path::Path;

use digcount_core::events::write_event_trace;
use digcount_core::fsm::write_fsm_trace;
use serde_json::json;

use super::{count_file, methods};
use crate::artifact::{ensure_dir, write_file, write_json, ArtifactHeader};
use crate::config::{stem, AppConfig};
use crate::error::Result;

/// Writes the state-machine trace, the event trace and a count summary;
/// returns the state-machine count for stdout.
pub fn run(cfg: &AppConfig, detections: &Path) -> Result<String> {
    let table = cfg.table()?;
    let (result, _) = count_file(detections, cfg, &table)?;
    let header = ArtifactHeader::new("count", &[detections.to_path_buf()], cfg, &table);
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let name = stem(detections);

    let header_line = json!({ "header": header });
    write_file(&dir.join(format!("{name}.fsm.jsonl")), |out| {
        serde_json::to_writer(&mut *out, &header_line)?;
        out.write_all(b"\n")?;
        write_fsm_trace(out, &result.fsm.trace)
    })?;
    write_file(&dir.join(format!("{name}.events.jsonl")), |out| {
        serde_json::to_writer(&mut *out, &header_line)?;
        out.write_all(b"\n")?;
        write_event_trace(out, &result.stream.events)
    })?;

    let counts: Vec<_> = methods(cfg, &table)
        .iter()
        .map(|m| {
            let times = m.completion_times(&result.stream.events);
            json!({ "method": m.label(), "count": times.len(), "completion_times": times })
        })
        .collect();
    let fsm_count = result.fsm.workload_count;
    write_json(
        &dir.join(format!("{name}.count.json")),
        &json!({
            "header": header,
            "frames_seen": result.stream.frames_seen,
            "frames_processed": result.stream.frames_processed,
            "events": result.stream.events.len(),
            "final_state": result.fsm.current_state,
            "counts": counts,
        }),
    )?;
    log::info!(
        "{}: {} frames, {} processed, {} events",
        detections.display(),
        result.stream.frames_seen,
        result.stream.frames_processed,
        result.stream.events.len()
    );
    Ok(format!("{fsm_count}\n"))
}
