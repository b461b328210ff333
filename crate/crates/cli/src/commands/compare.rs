use std::path::Path;

use digcount_core::heuristic::Preset;
use digcount_core::pipeline::Method;
use digcount_core::sim::{run_experiment, ExperimentResult};
use serde_json::json;

use super::{load_scenario, methods};
use crate::artifact::{write_text, ArtifactHeader};
use crate::commands::eval::write_results;
use crate::config::AppConfig;
use crate::error::{CliError, Result};
use crate::report::{pooled, Ordering, Results, Row};

fn ordering(result: &ExperimentResult, methods: &[Method]) -> Option<Ordering> {
    let position = |p: Preset| {
        methods
            .iter()
            .position(|m| matches!(m, Method::Heuristic { config } if config.preset == p))
    };
    let (strict, loose) = (position(Preset::Strict)?, position(Preset::Loose)?);
    let mut o = Ordering {
        replicates: result.replicates(),
        fake_not_above_loose: 0,
        missing_not_above_strict: 0,
        both: 0,
    };
    for r in 0..o.replicates {
        let t = result.totals_where(|c| c.replicate == r);
        let fake = t[0].fake <= t[loose].fake;
        let missing = t[0].missing <= t[strict].missing;
        o.fake_not_above_loose += u32::from(fake);
        o.missing_not_above_strict += u32::from(missing);
        o.both += u32::from(fake && missing);
    }
    Some(o)
}

fn cells_csv(result: &ExperimentResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["script", "noise", "replicate", "seed", "method", "tr", "ct", "tp", "fake", "missing", "p", "r", "f1"])
        .map_err(CliError::input)?;
    for c in &result.cells {
        let r = &c.report;
        w.write_record([
            c.script.clone(),
            c.noise.clone(),
            c.replicate.to_string(),
            c.seed.to_string(),
            c.method.clone(),
            r.tr.to_string(),
            r.ct.to_string(),
            r.tp.to_string(),
            r.fake.to_string(),
            r.missing.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
        ])
        .map_err(CliError::input)?;
    }
    crate::report::finish_csv(w)
}

pub fn run(cfg: &AppConfig, scenario_path: &Path) -> Result<String> {
    let table = cfg.table()?;
    let scenario = load_scenario(scenario_path, cfg)?;
    let methods = methods(cfg, &table);
    let result = run_experiment(
        &scenario.scripts,
        &scenario.noise,
        &methods,
        &cfg.pipeline(),
        scenario.experiment.replicates,
    )
    .map_err(|e| CliError::input(format!("{}: {e}", scenario_path.display())))?;

    // one row per (script, noise), pooled over replicates
    let mut rows = Vec::new();
    for noise in &scenario.noise {
        for script in &scenario.scripts {
            let reports = methods
                .iter()
                .map(|m| {
                    let label = m.label();
                    let cells: Vec<_> = result
                        .cells
                        .iter()
                        .filter(|c| c.script == script.name && c.noise == noise.name && c.method == label)
                        .map(|c| c.report)
                        .collect();
                    pooled(&cells)
                })
                .collect();
            rows.push(Row {
                id: format!("{}/{}", script.name, noise.name),
                reports,
            });
        }
    }

    let mut header = ArtifactHeader::new("compare", &[scenario_path.to_path_buf()], cfg, &table);
    header.extra = json!({ "scenario": scenario });
    let results = Results {
        header,
        matching: cfg.matching.describe(),
        methods: methods.iter().map(Method::label).collect(),
        rows,
        ordering: ordering(&result, &methods),
    };
    let text = write_results(&cfg.output.dir, "compare", &results)?;
    write_text(&cfg.output.dir.join("compare_cells.csv"), &results.header, &cells_csv(&result)?)?;
    Ok(text)
}
