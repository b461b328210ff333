//! Matching counted workloads against ground truth and the resulting
//! precision / recall / F1 figures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    GroundTruth,
    Fsm,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadRecord {
    pub completion_time: f64,
    pub source: Source,
}

impl WorkloadRecord {
    pub fn new(completion_time: f64, source: Source) -> Self {
        Self {
            completion_time,
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// One-to-one matching within the tolerance window.
    Temporal,
    /// Compare totals only: `TP = min(CT, Tr)`.
    CountOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Seconds.
    pub tolerance: f64,
    pub mode: MatchMode,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tolerance: 30.0,
            mode: MatchMode::Temporal,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(EvalError::Tolerance(self.tolerance));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self.mode {
            MatchMode::Temporal => format!("temporal matching, W = {} s", self.tolerance),
            MatchMode::CountOnly => "count-only (TP = min(CT, Tr))".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{which} workloads are not sorted by time (index {index})")]
    Unsorted { which: &'static str, index: usize },
    #[error("match tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("cannot aggregate an empty list of reports")]
    NoReports,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub tp: u64,
    pub fake: u64,
    pub missing: u64,
    /// `(prediction index, truth index)` for each match.
    pub pairs: Vec<(usize, usize)>,
}

fn check_sorted(times: &[f64], which: &'static str) -> Result<(), EvalError> {
    for (i, t) in times.iter().enumerate() {
        let ordered = match i {
            0 => !t.is_nan(),
            _ => *t >= times[i - 1],
        };
        if !ordered {
            return Err(EvalError::Unsorted { which, index: i });
        }
    }
    Ok(())
}

/// Greedy chronological matching: each prediction takes the earliest
/// unmatched truth within `tolerance` seconds.
pub fn match_times(pred: &[f64], truth: &[f64], tolerance: f64) -> Result<MatchOutcome, EvalError> {
    check_sorted(pred, "predicted")?;
    check_sorted(truth, "ground-truth")?;
    let mut out = MatchOutcome::default();
    let mut next_truth = 0;
    for (i, &p) in pred.iter().enumerate() {
        // truths this far behind can never match a later prediction either
        while next_truth < truth.len() && truth[next_truth] < p - tolerance {
            out.missing += 1;
            next_truth += 1;
        }
        if next_truth < truth.len() && (truth[next_truth] - p).abs() <= tolerance {
            out.pairs.push((i, next_truth));
            out.tp += 1;
            next_truth += 1;
        } else {
            out.fake += 1;
        }
    }
    out.missing += (truth.len() - next_truth) as u64;
    Ok(out)
}

pub fn match_workloads(
    pred: &[WorkloadRecord],
    truth: &[WorkloadRecord],
    cfg: &MatchConfig,
) -> Result<MatchOutcome, EvalError> {
    cfg.validate()?;
    let p: Vec<f64> = pred.iter().map(|r| r.completion_time).collect();
    let t: Vec<f64> = truth.iter().map(|r| r.completion_time).collect();
    match cfg.mode {
        MatchMode::Temporal => match_times(&p, &t, cfg.tolerance),
        MatchMode::CountOnly => {
            check_sorted(&p, "predicted")?;
            check_sorted(&t, "ground-truth")?;
            let (tp, fake, missing) = count_only(p.len() as u64, t.len() as u64);
            Ok(MatchOutcome {
                tp,
                fake,
                missing,
                pairs: Vec::new(),
            })
        }
    }
}

/// `(TP, fake, missing)` from totals alone.
pub fn count_only(counted: u64, truth: u64) -> (u64, u64, u64) {
    let tp = counted.min(truth);
    (tp, counted - tp, truth - tp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tr: u64,
    pub ct: u64,
    pub tp: u64,
    pub fake: u64,
    pub missing: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from match counts. Empty denominators give 1 for
/// precision/recall and F1 is 0 when both are 0.
pub fn compute_metrics(tp: u64, fake: u64, missing: u64) -> EvalReport {
    let ct = tp + fake;
    let tr = tp + missing;
    let precision = if ct == 0 { 1.0 } else { tp as f64 / ct as f64 };
    let recall = if tr == 0 { 1.0 } else { tp as f64 / tr as f64 };
    let f1 = f1_score(precision, recall);
    let report = EvalReport {
        tr,
        ct,
        tp,
        fake,
        missing,
        precision,
        recall,
        f1,
    };
    debug_assert!(report.ct == report.tp + report.fake && report.tr == report.tp + report.missing);
    report
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl From<&MatchOutcome> for EvalReport {
    fn from(m: &MatchOutcome) -> Self {
        compute_metrics(m.tp, m.fake, m.missing)
    }
}

/// Across-video summary: micro-averaged report plus the arithmetic means of
/// the per-video figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub micro: EvalReport,
    pub mean_tr: f64,
    pub mean_ct: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

// Summing in sorted order keeps the mean independent of report order.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn aggregate_reports(per_video: &[EvalReport]) -> Result<Aggregate, EvalError> {
    if per_video.is_empty() {
        return Err(EvalError::NoReports);
    }
    let (tp, fake, missing) = per_video.iter().fold((0, 0, 0), |acc, r| {
        (acc.0 + r.tp, acc.1 + r.fake, acc.2 + r.missing)
    });
    let mean = |f: fn(&EvalReport) -> f64| order_free_mean(per_video.iter().map(f).collect());
    Ok(Aggregate {
        micro: compute_metrics(tp, fake, missing),
        mean_tr: mean(|r| r.tr as f64),
        mean_ct: mean(|r| r.ct as f64),
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        mean_f1: mean(|r| r.f1),
    })
}

/// Two-decimal rounding used in printed tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(times: &[f64], source: Source) -> Vec<WorkloadRecord> {
        times.iter().map(|t| WorkloadRecord::new(*t, source)).collect()
    }

    fn tfm(m: &MatchOutcome) -> (u64, u64, u64) {
        (m.tp, m.fake, m.missing)
    }

    #[test]
    fn match_examples() {
        let cfg = MatchConfig {
            tolerance: 5.0,
            ..MatchConfig::default()
        };
        let m = match_workloads(
            &recs(&[10.0], Source::Fsm),
            &recs(&[12.0], Source::GroundTruth),
            &cfg,
        )
        .unwrap();
        assert_eq!(tfm(&m), (1, 0, 0));

        let times = [3.0, 40.0, 41.0, 100.0];
        let m = match_workloads(
            &recs(&times, Source::Fsm),
            &recs(&times, Source::GroundTruth),
            &cfg,
        )
        .unwrap();
        assert_eq!(tfm(&m), (4, 0, 0));

        let m = match_workloads(
            &recs(&[10.0, 11.0], Source::Fsm),
            &recs(&[12.0], Source::GroundTruth),
            &cfg,
        )
        .unwrap();
        assert_eq!(tfm(&m), (1, 1, 0));
        // brute force on this instance: either prediction can take the single
        // truth, so the maximum matching has size one
        assert_eq!(m.pairs, vec![(0, 0)]);
    }

    #[test]
    fn window_boundaries_are_inclusive() {
        let m = match_times(&[0.0], &[30.0], 30.0).unwrap();
        assert_eq!(tfm(&m), (1, 0, 0));
        let m = match_times(&[0.0], &[30.5], 30.0).unwrap();
        assert_eq!(tfm(&m), (0, 1, 1));
    }

    #[test]
    fn unsorted_input_is_rejected() {
        assert_eq!(
            match_times(&[5.0, 1.0], &[], 1.0),
            Err(EvalError::Unsorted {
                which: "predicted",
                index: 1
            })
        );
        assert!(matches!(
            match_times(&[], &[f64::NAN], 1.0),
            Err(EvalError::Unsorted { which: "ground-truth", .. })
        ));
        let bad = MatchConfig {
            tolerance: 0.0,
            ..MatchConfig::default()
        };
        assert!(match_workloads(&[], &[], &bad).is_err());
    }

    #[test]
    fn count_only_mode() {
        let cfg = MatchConfig {
            mode: MatchMode::CountOnly,
            ..MatchConfig::default()
        };
        let m = match_workloads(
            &recs(&[1.0, 2.0, 3.0], Source::Heuristic),
            &recs(&[500.0, 600.0], Source::GroundTruth),
            &cfg,
        )
        .unwrap();
        assert_eq!(tfm(&m), (2, 1, 0));
    }

    #[test]
    fn metric_examples() {
        // Table-1 style rounding of the averaged rows
        assert!((f1_score(0.91, 0.94) - 0.925).abs() < 0.001);
        assert_eq!(round2(f1_score(0.91, 0.94)), 0.92);
        // 2 * 0.97 / 1.97 = 0.98477, within rounding tolerance of the printed
        // 0.99; the underlying counts (38 of 39, no fakes) give 0.987
        assert!((f1_score(1.0, 0.97) - 0.985).abs() < 0.001);
        assert!((f1_score(1.0, 0.97) - 0.99).abs() <= 0.01);
        assert_eq!(round2(compute_metrics(38, 0, 1).f1), 0.99);

        let r = compute_metrics(0, 0, 0);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = compute_metrics(0, 3, 2);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = compute_metrics(9, 1, 1);
        assert_eq!((r.ct, r.tr), (10, 10));
    }

    #[test]
    fn aggregate_examples() {
        let one = compute_metrics(9, 1, 1);
        let agg = aggregate_reports(&[one]).unwrap();
        assert_eq!(agg.micro, one);
        assert_eq!(agg.mean_precision, one.precision);

        let agg = aggregate_reports(&[compute_metrics(9, 1, 1), compute_metrics(8, 0, 2)]).unwrap();
        // hand arithmetic: 17 / 18 and 17 / 20
        assert_eq!(agg.micro.precision, 17.0 / 18.0);
        assert_eq!(agg.micro.recall, 17.0 / 20.0);
        assert!((agg.micro.precision - 0.944).abs() < 0.001);
        assert_eq!(agg.mean_precision, (0.9 + 1.0) / 2.0);

        assert_eq!(aggregate_reports(&[]), Err(EvalError::NoReports));
    }

    #[test]
    fn aggregate_ignores_order() {
        let reports = [
            compute_metrics(3, 1, 0),
            compute_metrics(7, 0, 3),
            compute_metrics(1, 2, 2),
            compute_metrics(11, 1, 1),
        ];
        let mut rev = reports;
        rev.reverse();
        assert_eq!(aggregate_reports(&reports), aggregate_reports(&rev));
    }
}
