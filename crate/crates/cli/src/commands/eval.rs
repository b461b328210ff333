use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use digcount_core::eval::{match_workloads, EvalReport, Source, WorkloadRecord};
use digcount_core::pipeline::Method;
use serde::Deserialize;

use super::{count_file, methods};
use crate::artifact::{ensure_dir, write_json, write_text, ArtifactHeader};
use crate::config::{stem, AppConfig};
use crate::error::{CliError, Result};
use crate::report::{Results, Row};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthLine {
    video: String,
    t: f64,
}

/// Ground-truth completion times per video. Blank lines are skipped and a
/// leading `{"header": ...}` record is allowed.
pub fn read_truth(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && line.trim_start().starts_with("{\"header\"") {
            continue;
        }
        let rec: TruthLine = serde_json::from_str(line)
            .map_err(|e| CliError::input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if !rec.t.is_finite() || rec.t < 0.0 {
            return Err(CliError::input(format!(
                "{} line {}: time must be finite and nonnegative",
                path.display(),
                i + 1
            )));
        }
        out.entry(rec.video).or_default().push(rec.t);
    }
    for times in out.values_mut() {
        times.sort_by(f64::total_cmp);
    }
    Ok(out)
}

/// Detection files named directly or found (`*.jsonl`, sorted) in the given
/// directories.
pub fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn video_id(path: &Path, header: Option<&serde_json::Value>) -> String {
    header
        .and_then(|h| h.get("video"))
        .and_then(|v| v.as_str())
        .map(str::to_owned)
        .unwrap_or_else(|| stem(path))
}

pub fn evaluate(cfg: &AppConfig, truth_path: &Path, detections: &[PathBuf]) -> Result<Results> {
    let table = cfg.table()?;
    let files = expand_inputs(detections)?;
    if files.is_empty() {
        return Err(CliError::input("no detection files given"));
    }
    let truth = read_truth(truth_path)?;
    let methods = methods(cfg, &table);

    let mut rows = Vec::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for f in &files {
        let (result, header) = count_file(f, cfg, &table)?;
        let id = video_id(f, header.as_ref());
        if let Some(prev) = seen.insert(id.clone(), f.clone()) {
            return Err(CliError::input(format!(
                "video {id} appears in both {} and {}",
                prev.display(),
                f.display()
            )));
        }
        let gt: Vec<WorkloadRecord> = truth
            .get(&id)
            .map(|ts| ts.iter().map(|t| WorkloadRecord::new(*t, Source::GroundTruth)).collect())
            .unwrap_or_default();
        let mut reports = Vec::new();
        for m in &methods {
            let source = match m {
                Method::Fsm { .. } => Source::Fsm,
                Method::Heuristic { .. } => Source::Heuristic,
            };
            let pred: Vec<WorkloadRecord> = m
                .completion_times(&result.stream.events)
                .into_iter()
                .map(|t| WorkloadRecord::new(t, source))
                .collect();
            let outcome = match_workloads(&pred, &gt, &cfg.matching).map_err(CliError::input)?;
            reports.push(EvalReport::from(&outcome));
        }
        rows.push(Row { id, reports });
    }
    let unknown: Vec<&str> = truth.keys().filter(|v| !seen.contains_key(*v)).map(String::as_str).collect();
    if !unknown.is_empty() {
        return Err(CliError::input(format!(
            "ground truth references videos absent from the detections: {}",
            unknown.join(", ")
        )));
    }

    let mut inputs = vec![truth_path.to_path_buf()];
    inputs.extend(files);
    Ok(Results {
        header: ArtifactHeader::new("eval", &inputs, cfg, &table),
        matching: cfg.matching.describe(),
        methods: methods.iter().map(Method::label).collect(),
        rows,
        ordering: None,
    })
}

/// Table text, table CSV, totals CSV and the JSON results, named `<base>.*`.
pub fn write_results(dir: &Path, base: &str, results: &Results) -> Result<String> {
    ensure_dir(dir)?;
    let text = format!("{}\n{}", results.render_table()?, results.render_totals());
    write_text(&dir.join(format!("{base}.txt")), &results.header, &text)?;
    write_text(&dir.join(format!("{base}.csv")), &results.header, &results.table_csv()?)?;
    write_text(&dir.join(format!("{base}_totals.csv")), &results.header, &results.totals_csv()?)?;
    write_json(&dir.join(format!("{base}.json")), results)?;
    Ok(text)
}

pub fn run(cfg: &AppConfig, truth: &Path, detections: &[PathBuf]) -> Result<String> {
    let results = evaluate(cfg, truth, detections)?;
    write_results(&cfg.output.dir, "eval", &results)
}
