//! End-to-end counting: detections in, events and counts out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{
    apply_stride, FillGaps, FilterConfig, FilterConfigError, FrameDetections, StreamError,
};
use crate::eval::{EvalError, MatchConfig};
use crate::events::{Event, EventError, EventIdentifier, EventWindowConfig};
use crate::fsm::{run_fsm, FsmRun, TransitionTable};
use crate::heuristic::{run_heuristic, HeuristicConfig, HeuristicConfigError, HeuristicRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicPresets {
    pub strict: HeuristicConfig,
    pub loose: HeuristicConfig,
}

impl Default for HeuristicPresets {
    fn default() -> Self {
        Self {
            strict: HeuristicConfig::strict(),
            loose: HeuristicConfig::loose(),
        }
    }
}

/// Every algorithmic parameter of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub events: EventWindowConfig,
    pub heuristic: HeuristicPresets,
    pub matching: MatchConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("filter: {0}")]
    Filter(#[from] FilterConfigError),
    #[error("events: {0}")]
    Events(#[from] EventError),
    #[error("heuristic: {0}")]
    Heuristic(#[from] HeuristicConfigError),
    #[error("matching: {0}")]
    Matching(#[from] EvalError),
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.filter.validate()?;
        self.events.validate()?;
        self.heuristic.strict.validate()?;
        self.heuristic.loose.validate()?;
        self.matching.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Events(#[from] EventError),
}

/// Events of one stream plus frame bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    pub events: Vec<Event>,
    /// Frames after gap filling, before striding.
    pub frames_seen: u64,
    pub frames_processed: u64,
}

/// Gap filling, stride, confidence filter, one-per-class, event
/// identification. Stops at the first stream error.
pub fn extract_events<I>(frames: I, filter: &FilterConfig, window: &EventWindowConfig) -> Result<EventStream, PipelineError>
where
    I: IntoIterator<Item = Result<FrameDetections, StreamError>>,
{
    filter.validate().map_err(ConfigError::from)?;
    let mut identifier = EventIdentifier::new(window.clone()).map_err(ConfigError::from)?;
    let mut out = EventStream::default();
    let mut seen = 0u64;
    let counted = FillGaps::new(frames.into_iter(), filter.fps).inspect(|_| seen += 1);
    for frame in apply_stride(counted, filter.stride).map_err(ConfigError::from)? {
        let frame = filter.clean(&frame?);
        out.events.extend(identifier.process(&frame)?);
        out.frames_processed += 1;
    }
    out.frames_seen = seen;
    Ok(out)
}

/// [`extract_events`] over frames already in memory.
pub fn events_from_frames(frames: &[FrameDetections], cfg: &PipelineConfig) -> Result<EventStream, PipelineError> {
    extract_events(frames.iter().cloned().map(Ok), &cfg.filter, &cfg.events)
}

/// Business logic applied to an event stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Fsm { table: TransitionTable },
    Heuristic { config: HeuristicConfig },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Fsm { .. } => "fsm".to_string(),
            Method::Heuristic { config } => config.label(),
        }
    }

    /// Completion timestamps of the counted workloads.
    pub fn completion_times(&self, events: &[Event]) -> Vec<f64> {
        match self {
            Method::Fsm { table } => run_fsm(events.iter().copied(), table).completion_times(),
            Method::Heuristic { config } => run_heuristic(events.iter().copied(), config).completion_times,
        }
    }
}

/// FSM against the two heuristic presets, the usual comparison set.
pub fn standard_methods(table: &TransitionTable, cfg: &PipelineConfig) -> Vec<Method> {
    vec![
        Method::Fsm { table: *table },
        Method::Heuristic { config: cfg.heuristic.strict },
        Method::Heuristic { config: cfg.heuristic.loose },
    ]
}

/// Everything `count` reports for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub stream: EventStream,
    pub fsm: FsmRun,
    pub strict: HeuristicRun,
    pub loose: HeuristicRun,
}

pub fn count_stream<I>(frames: I, cfg: &PipelineConfig, table: &TransitionTable) -> Result<CountResult, PipelineError>
where
    I: IntoIterator<Item = Result<FrameDetections, StreamError>>,
{
    cfg.validate()?;
    let stream = extract_events(frames, &cfg.filter, &cfg.events)?;
    let fsm = run_fsm(stream.events.iter().copied(), table);
    let strict = run_heuristic(stream.events.iter().copied(), &cfg.heuristic.strict);
    let loose = run_heuristic(stream.events.iter().copied(), &cfg.heuristic.loose);
    Ok(CountResult {
        stream,
        fsm,
        strict,
        loose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::parse_detection_stream;

    #[test]
    fn empty_stream_counts_zero() {
        let r = count_stream(Vec::new(), &PipelineConfig::default(), &TransitionTable::default()).unwrap();
        assert_eq!(r.fsm.workload_count, 0);
        assert_eq!(r.stream.frames_processed, 0);
    }

    #[test]
    fn gaps_count_toward_stride() {
        let text = "{\"frame\":0,\"class\":\"bucket_vertical\",\"x\":0,\"y\":0,\"w\":10,\"h\":10,\"conf\":0.9}\n\
                    {\"frame\":9,\"class\":\"bucket_vertical\",\"x\":0,\"y\":0,\"w\":10,\"h\":10,\"conf\":0.9}\n";
        let frames = parse_detection_stream(text, 25.0).unwrap();
        let s = events_from_frames(&frames, &PipelineConfig::default()).unwrap();
        assert_eq!(s.frames_seen, 10);
        // frames 0 and 5 are processed; 5 is a filled gap
        assert_eq!(s.frames_processed, 2);
        assert_eq!(s.events.len(), 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.filter.stride = 0;
        assert!(matches!(
            count_stream(Vec::new(), &cfg, &TransitionTable::default()),
            Err(PipelineError::Config(ConfigError::Filter(FilterConfigError::ZeroStride)))
        ));
    }

    #[test]
    fn config_toml_roundtrip() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: PipelineConfig = toml::from_str("[filter]\nstride = 1\n").unwrap();
        assert_eq!(partial.filter.stride, 1);
        assert_eq!(partial.events, EventWindowConfig::default());
        assert!(toml::from_str::<PipelineConfig>("[filter]\nstrid = 1\n").is_err());
    }
}
