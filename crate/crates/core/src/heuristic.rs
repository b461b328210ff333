//! Threshold-counting baseline over bucket events.
//!
//! Vertical and horizontal bucket events are tallied; a horizontal event that
//! arrives once both tallies reach their thresholds counts one workload. Every
//! horizontal event also clears the vertical tally.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Strict,
    Loose,
    Custom,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Strict => "strict",
            Preset::Loose => "loose",
            Preset::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicConfig {
    pub vertical_threshold: u32,
    pub horizontal_threshold: u32,
    #[serde(default = "custom")]
    pub preset: Preset,
}

fn custom() -> Preset {
    Preset::Custom
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("heuristic thresholds must be at least 1 (vertical {vertical}, horizontal {horizontal})")]
pub struct HeuristicConfigError {
    pub vertical: u32,
    pub horizontal: u32,
}

impl HeuristicConfig {
    pub const fn strict() -> Self {
        Self {
            vertical_threshold: 4,
            horizontal_threshold: 2,
            preset: Preset::Strict,
        }
    }

    pub const fn loose() -> Self {
        Self {
            vertical_threshold: 2,
            horizontal_threshold: 1,
            preset: Preset::Loose,
        }
    }

    pub fn custom(vertical_threshold: u32, horizontal_threshold: u32) -> Self {
        Self {
            vertical_threshold,
            horizontal_threshold,
            preset: Preset::Custom,
        }
    }

    pub fn validate(&self) -> Result<(), HeuristicConfigError> {
        if self.vertical_threshold == 0 || self.horizontal_threshold == 0 {
            return Err(HeuristicConfigError {
                vertical: self.vertical_threshold,
                horizontal: self.horizontal_threshold,
            });
        }
        Ok(())
    }

    /// `strict(V=4,H=2)` style label used in reports.
    pub fn label(&self) -> String {
        format!(
            "{}(V={},H={})",
            self.preset, self.vertical_threshold, self.horizontal_threshold
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeuristicCounters {
    pub vertical_count: u64,
    pub horizontal_count: u64,
    pub workload_count: u64,
}

pub fn heuristic_step(
    counters: HeuristicCounters,
    event: EventKind,
    cfg: &HeuristicConfig,
) -> (HeuristicCounters, bool) {
    let mut next = counters;
    match event {
        EventKind::VerticalBucketFound => {
            next.vertical_count += 1;
            (next, false)
        }
        EventKind::HorizontalBucketFound => {
            next.horizontal_count += 1;
            let counted = next.vertical_count >= u64::from(cfg.vertical_threshold)
                && next.horizontal_count >= u64::from(cfg.horizontal_threshold);
            next.vertical_count = 0;
            if counted {
                next.horizontal_count = 0;
                next.workload_count += 1;
            }
            (next, counted)
        }
        _ => (next, false),
    }
}

/// Final counters plus the timestamps at which workloads were counted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeuristicRun {
    pub counters: HeuristicCounters,
    pub completion_times: Vec<f64>,
}

pub fn run_heuristic<I>(events: I, cfg: &HeuristicConfig) -> HeuristicRun
where
    I: IntoIterator<Item = Event>,
{
    let mut run = HeuristicRun::default();
    for e in events {
        let (next, counted) = heuristic_step(run.counters, e.kind, cfg);
        run.counters = next;
        if counted {
            run.completion_times.push(e.timestamp);
        }
    }
    run
}
