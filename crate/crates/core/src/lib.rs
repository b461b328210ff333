//! Counting excavator workloads from per-frame object detections.
//!
//! Detections stream through [`detection`] (parsing, confidence filtering,
//! one-per-class, stride), become business events in [`events`], and drive
//! the state machine in [`fsm`]. [`heuristic`] holds the threshold baseline
//! the state machine is compared against, [`eval`] scores counts against
//! ground truth and [`sim`] generates labelled synthetic streams.

pub mod detection;
pub mod eval;
pub mod events;
pub mod fsm;
pub mod heuristic;
pub mod pipeline;
pub mod sim;

pub use detection::{Detection, DetectionClass, FilterConfig, FrameDetections};
pub use events::{Event, EventKind, EventWindowConfig};
pub use fsm::{BusinessState, TransitionTable};
pub use heuristic::HeuristicConfig;
pub use pipeline::PipelineConfig;
