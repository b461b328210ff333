//! WebAssembly bindings for the browser demo. Every export takes text and
//! returns JSON text; the plain `*_json` functions carry the logic so they can
//! be tested natively.

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use digcount_core::detection::{parse_detection_stream, write_detection_stream, DEFAULT_FPS};
use digcount_core::eval::{compute_metrics, match_workloads, EvalReport, Source, WorkloadRecord};
use digcount_core::fsm::{load_transition_table, run_fsm, TransitionTable};
use digcount_core::pipeline::{count_stream, events_from_frames, standard_methods, Method, PipelineConfig};
use digcount_core::sim::{generate_stream, stream_seed, Scenario};
use digcount_core::EventKind;

fn table_from(text: &str) -> Result<TransitionTable, String> {
    if text.trim().is_empty() {
        Ok(TransitionTable::default())
    } else {
        load_transition_table(text).map_err(|e| format!("transition table: {e}"))
    }
}

#[derive(Serialize)]
struct MethodReport {
    method: String,
    #[serde(flatten)]
    report: EvalReport,
}

/// Generates every stream of a scenario at one seed replicate and scores the
/// three counting methods against the scripted truth. The first stream is
/// returned in the wire format so it can be fed to [`count_json`].
pub fn simulate_json(scenario_toml: &str, replicate: u32) -> Result<String, String> {
    let scenario = Scenario::from_toml(scenario_toml).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let methods = standard_methods(&TransitionTable::default(), &cfg);
    let mut rows = Vec::new();
    let mut first_stream = None;
    for noise in &scenario.noise {
        for (i, script) in scenario.scripts.iter().enumerate() {
            let seeded = noise.with_seed(stream_seed(noise.seed, replicate, i));
            let generated = generate_stream(script, &seeded).map_err(|e| e.to_string())?;
            let events = events_from_frames(&generated.frames, &cfg).map_err(|e| e.to_string())?.events;
            let mut reports = Vec::new();
            for m in &methods {
                let source = match m {
                    Method::Fsm { .. } => Source::Fsm,
                    Method::Heuristic { .. } => Source::Heuristic,
                };
                let pred: Vec<WorkloadRecord> = m
                    .completion_times(&events)
                    .into_iter()
                    .map(|t| WorkloadRecord::new(t, source))
                    .collect();
                let out = match_workloads(&pred, &generated.truth, &cfg.matching).map_err(|e| e.to_string())?;
                reports.push(MethodReport {
                    method: m.label(),
                    report: compute_metrics(out.tp, out.fake, out.missing),
                });
            }
            if first_stream.is_none() {
                let mut buf = Vec::new();
                write_detection_stream(&mut buf, None, &generated.frames).map_err(|e| e.to_string())?;
                first_stream = Some(String::from_utf8(buf).map_err(|e| e.to_string())?);
            }
            rows.push(json!({
                "video": format!("{}.{}", script.name, noise.name),
                "frames": generated.frames.len(),
                "truth": generated.truth.len(),
                "methods": reports,
            }));
        }
    }
    let out = json!({ "replicate": replicate, "rows": rows, "stream": first_stream });
    Ok(out.to_string())
}

/// Counts workloads in a pasted detection stream under a transition table
/// (empty text for the default one).
pub fn count_json(detections: &str, table_toml: &str) -> Result<String, String> {
    let table = table_from(table_toml)?;
    let frames = parse_detection_stream(detections, DEFAULT_FPS).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let r = count_stream(frames.into_iter().map(Ok), &cfg, &table).map_err(|e| e.to_string())?;
    let out = json!({
        "frames_seen": r.stream.frames_seen,
        "frames_processed": r.stream.frames_processed,
        "events": r.stream.events.len(),
        "counts": [
            { "method": "fsm", "count": r.fsm.workload_count, "completion_times": r.fsm.completion_times() },
            { "method": cfg.heuristic.strict.label(), "count": r.strict.counters.workload_count, "completion_times": r.strict.completion_times },
            { "method": cfg.heuristic.loose.label(), "count": r.loose.counters.workload_count, "completion_times": r.loose.completion_times },
        ],
        "trace": r.fsm.trace,
    });
    Ok(out.to_string())
}

/// Steps the state machine through event codes typed by hand, such as
/// `e0 e1 e3 e4 e0`.
pub fn trace_json(event_codes: &str, table_toml: &str) -> Result<String, String> {
    let table = table_from(table_toml)?;
    let mut events = Vec::new();
    for (i, code) in event_codes.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).enumerate() {
        let kind: EventKind = code.parse().map_err(|_| format!("unknown event code `{code}`"))?;
        events.push(digcount_core::Event {
            kind,
            frame_index: i as u64,
            timestamp: i as f64,
        });
    }
    let run = run_fsm(events, &table);
    let arcs: Vec<Value> = table
        .arcs()
        .map(|(s, e, n)| json!([s.code(), e.code(), n.code()]))
        .collect();
    let out = json!({
        "count": run.workload_count,
        "state": run.current_state.code(),
        "trace": run.trace,
        "table": arcs,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn simulate(scenario_toml: &str, replicate: u32) -> Result<String, JsValue> {
    simulate_json(scenario_toml, replicate).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn count(detections: &str, table_toml: &str) -> Result<String, JsValue> {
    count_json(detections, table_toml).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn trace(event_codes: &str, table_toml: &str) -> Result<String, JsValue> {
    trace_json(event_codes, table_toml).map_err(|e| JsValue::from_str(&e))
}

/// The built-in transition table as TOML, for the page's editor.
#[wasm_bindgen]
pub fn default_table() -> String {
    TransitionTable::default().to_toml()
}
