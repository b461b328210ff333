//! Per-video metric tables and fake/missing totals, rendered as aligned text
//! and as CSV.

use digcount_core::eval::{aggregate_reports, compute_metrics, round2, Aggregate, EvalReport};
use serde::{Deserialize, Serialize};

use crate::artifact::ArtifactHeader;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Video identifier, or `script/noise` for simulated suites.
    pub id: String,
    /// One report per method, in [`Results::methods`] order.
    pub reports: Vec<EvalReport>,
}

/// Everything a table is rendered from; also the `*.json` artifact that the
/// `report` subcommand reads back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub header: ArtifactHeader,
    pub matching: String,
    pub methods: Vec<String>,
    pub rows: Vec<Row>,
    /// Replicates in which the state machine made no more fakes than the
    /// loose preset and no more misses than the strict preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Ordering>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    pub replicates: u32,
    pub fake_not_above_loose: u32,
    pub missing_not_above_strict: u32,
    pub both: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub method: String,
    pub tr: u64,
    pub ct: u64,
    pub tp: u64,
    pub fake: u64,
    pub missing: u64,
}

impl Results {
    pub fn aggregates(&self) -> Result<Vec<Aggregate>> {
        (0..self.methods.len())
            .map(|m| {
                let per: Vec<EvalReport> = self.rows.iter().map(|r| r.reports[m]).collect();
                aggregate_reports(&per).map_err(CliError::input)
            })
            .collect()
    }

    pub fn totals(&self) -> Vec<Totals> {
        self.methods
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let mut t = Totals {
                    method: name.clone(),
                    tr: 0,
                    ct: 0,
                    tp: 0,
                    fake: 0,
                    missing: 0,
                };
                for r in &self.rows {
                    let rep = &r.reports[m];
                    t.tr += rep.tr;
                    t.ct += rep.ct;
                    t.tp += rep.tp;
                    t.fake += rep.fake;
                    t.missing += rep.missing;
                }
                t
            })
            .collect()
    }

    /// Aligned table: NO., Tr, then CT, P, R, F1 per method, followed by the
    /// per-video mean (AVG) and the pooled (MICRO) rows.
    pub fn render_table(&self) -> Result<String> {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut head = vec!["NO.".to_string(), "Tr".to_string()];
        for _ in &self.methods {
            head.extend(["CT", "P", "R", "F1"].map(String::from));
        }
        grid.push(head);
        for r in &self.rows {
            let mut line = vec![r.id.clone(), r.reports.first().map_or(0, |x| x.tr).to_string()];
            for rep in &r.reports {
                line.push(rep.ct.to_string());
                line.extend([rep.precision, rep.recall, rep.f1].map(|v| format!("{:.2}", round2(v))));
            }
            grid.push(line);
        }
        if !self.rows.is_empty() {
            let aggs = self.aggregates()?;
            let mut avg = vec!["AVG".to_string(), format!("{:.1}", aggs[0].mean_tr)];
            let mut micro = vec!["MICRO".to_string(), aggs[0].micro.tr.to_string()];
            for a in &aggs {
                avg.push(format!("{:.1}", a.mean_ct));
                avg.extend([a.mean_precision, a.mean_recall, a.mean_f1].map(|v| format!("{:.2}", round2(v))));
                micro.push(a.micro.ct.to_string());
                micro.extend([a.micro.precision, a.micro.recall, a.micro.f1].map(|v| format!("{:.2}", round2(v))));
            }
            grid.push(avg);
            grid.push(micro);
        }

        let cols = grid[0].len();
        let width: Vec<usize> = (0..cols).map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let group_width = |m: usize| (2 + 4 * m..6 + 4 * m).map(|c| width[c]).sum::<usize>() + 3;
        let lead = width[0] + width[1] + 1;

        let mut out = format!("matching: {}\n", self.matching);
        out.push_str(&" ".repeat(lead));
        for (m, name) in self.methods.iter().enumerate() {
            out.push_str(&format!(" | {:<w$}", name, w = group_width(m)));
        }
        out = out.trim_end().to_string();
        out.push('\n');
        for (i, line) in grid.iter().enumerate() {
            if i == 1 || (i == grid.len() - 2 && !self.rows.is_empty()) {
                out.push_str(&rule(&width));
            }
            let mut text = format!("{:<w0$} {:>w1$}", line[0], line[1], w0 = width[0], w1 = width[1]);
            for m in 0..self.methods.len() {
                text.push_str(" |");
                for c in 2 + 4 * m..6 + 4 * m {
                    text.push_str(&format!(" {:>w$}", line[c], w = width[c]));
                }
            }
            out.push_str(&text);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn render_totals(&self) -> String {
        let totals = self.totals();
        let w = totals.iter().map(|t| t.method.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<w$}  {:>6}  {:>7}  {:>4}  {:>4}\n", "method", "fake", "missing", "Tr", "CT");
        for t in &totals {
            out.push_str(&format!("{:<w$}  {:>6}  {:>7}  {:>4}  {:>4}\n", t.method, t.fake, t.missing, t.tr, t.ct));
        }
        if let Some(o) = &self.ordering {
            out.push_str(&format!(
                "replicates with fsm fake <= loose fake: {}/{}; fsm missing <= strict missing: {}/{}; both: {}/{}\n",
                o.fake_not_above_loose, o.replicates, o.missing_not_above_strict, o.replicates, o.both, o.replicates
            ));
        }
        out
    }

    /// Full-precision per-video table with AVG and MICRO rows.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["id".to_string(), "tr".to_string()];
        for m in &self.methods {
            for f in ["ct", "tp", "fake", "missing", "p", "r", "f1"] {
                head.push(format!("{m}.{f}"));
            }
        }
        w.write_record(&head).map_err(CliError::input)?;
        let fields = |rep: &EvalReport| {
            vec![
                rep.ct.to_string(),
                rep.tp.to_string(),
                rep.fake.to_string(),
                rep.missing.to_string(),
                rep.precision.to_string(),
                rep.recall.to_string(),
                rep.f1.to_string(),
            ]
        };
        for r in &self.rows {
            let mut rec = vec![r.id.clone(), r.reports.first().map_or(0, |x| x.tr).to_string()];
            for rep in &r.reports {
                rec.extend(fields(rep));
            }
            w.write_record(&rec).map_err(CliError::input)?;
        }
        if !self.rows.is_empty() {
            let aggs = self.aggregates()?;
            let mut avg = vec!["AVG".to_string(), aggs[0].mean_tr.to_string()];
            let mut micro = vec!["MICRO".to_string(), aggs[0].micro.tr.to_string()];
            for a in &aggs {
                avg.extend([
                    a.mean_ct.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    a.mean_precision.to_string(),
                    a.mean_recall.to_string(),
                    a.mean_f1.to_string(),
                ]);
                micro.extend(fields(&a.micro));
            }
            w.write_record(&avg).map_err(CliError::input)?;
            w.write_record(&micro).map_err(CliError::input)?;
        }
        finish_csv(w)
    }

    /// Fake and missing totals per method, one row each, for bar plots.
    pub fn totals_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in self.totals() {
            w.serialize(t).map_err(CliError::input)?;
        }
        finish_csv(w)
    }
}

fn rule(width: &[usize]) -> String {
    let total = width.iter().sum::<usize>() + width.len() + 2 * (width.len() - 2) / 4;
    format!("{}\n", "-".repeat(total))
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(CliError::input)
}

/// Report built from pooled counts, for summing rows over replicates.
pub fn pooled(reports: &[EvalReport]) -> EvalReport {
    let (tp, fake, missing) = reports
        .iter()
        .fold((0, 0, 0), |a, r| (a.0 + r.tp, a.1 + r.fake, a.2 + r.missing));
    compute_metrics(tp, fake, missing)
}
