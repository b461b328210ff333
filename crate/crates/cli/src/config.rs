//! Layered configuration: built-in defaults, then the `--config` file, then
//! `DIGCOUNT_*` environment variables, then command-line flags.

use std::path::{Path, PathBuf};

use digcount_core::eval::MatchConfig;
use digcount_core::fsm::{load_transition_table, TransitionTable};
use digcount_core::heuristic::HeuristicConfig;
use digcount_core::pipeline::{HeuristicPresets, PipelineConfig};
use digcount_core::{EventWindowConfig, FilterConfig};
use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "DIGCOUNT_";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmSection {
    /// Transition table file; the built-in table when unset.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogSection {
    /// `error`, `warn`, `info`, `debug` or `trace`.
    pub level: String,
}

impl Default for LogSection {
    fn default() -> Self {
        Self { level: "warn".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PresetChoice {
    Strict,
    Loose,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Replaces every noise seed of a scenario when set.
    pub seed: Option<u64>,
    /// Heuristic preset compared against the state machine; both when unset.
    pub preset: Option<PresetChoice>,
    pub filter: FilterConfig,
    pub events: EventWindowConfig,
    pub heuristic: HeuristicPresets,
    pub matching: MatchConfig,
    pub fsm: FsmSection,
    pub output: OutputSection,
    pub log: LogSection,
}

/// Values given on the command line, applied last.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub table: Option<PathBuf>,
    pub preset: Option<PresetChoice>,
    pub out: Option<PathBuf>,
}

impl AppConfig {
    pub fn load(overrides: &Overrides) -> Result<Self> {
        let mut figment = Figment::from(Serialized::defaults(AppConfig::default()));
        if let Some(path) = &overrides.config {
            if !path.is_file() {
                return Err(CliError::config(format!("config file {} does not exist", path.display())));
            }
            figment = figment.merge(Toml::file_exact(path));
        }
        figment = figment.merge(Env::prefixed(ENV_PREFIX).split("__"));
        let mut cfg: AppConfig = figment.extract().map_err(|e| CliError::config(flatten_figment(e)))?;
        if let Some(seed) = overrides.seed {
            cfg.seed = Some(seed);
        }
        if let Some(t) = &overrides.table {
            cfg.fsm.table = Some(t.clone());
        }
        if let Some(p) = overrides.preset {
            cfg.preset = Some(p);
        }
        if let Some(o) = &overrides.out {
            cfg.output.dir = o.clone();
        }
        cfg.pipeline().validate().map_err(CliError::config)?;
        for (name, h) in [("strict", &cfg.heuristic.strict), ("loose", &cfg.heuristic.loose)] {
            if h.preset != digcount_core::heuristic::Preset::Custom && h.preset.to_string() != name {
                return Err(CliError::config(format!(
                    "heuristic.{name}.preset is {}; expected {name} or custom",
                    h.preset
                )));
            }
        }
        if cfg.log.level.parse::<log::LevelFilter>().is_err() {
            return Err(CliError::config(format!("unknown log level {:?}", cfg.log.level)));
        }
        Ok(cfg)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            filter: self.filter.clone(),
            events: self.events.clone(),
            heuristic: self.heuristic,
            matching: self.matching,
        }
    }

    /// Heuristic configurations to evaluate, in report order.
    pub fn heuristics(&self) -> Vec<HeuristicConfig> {
        match self.preset {
            None => vec![self.heuristic.strict, self.heuristic.loose],
            Some(PresetChoice::Strict) => vec![self.heuristic.strict],
            Some(PresetChoice::Loose) => vec![self.heuristic.loose],
        }
    }

    pub fn table(&self) -> Result<TransitionTable> {
        match &self.fsm.table {
            None => Ok(TransitionTable::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("transition table {}: {e}", path.display())))?;
                load_transition_table(&text)
                    .map_err(|e| CliError::config(format!("transition table {}: {e}", path.display())))
            }
        }
    }
}

fn flatten_figment(e: figment::Error) -> String {
    e.into_iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// File stem used to name per-input artifacts.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stream".into())
}
