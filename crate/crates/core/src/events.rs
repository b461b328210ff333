//! Business events derived from the filtered frame stream.
//!
//! Simple events (`e0`..`e2`) are a pure function of one frame. The relational
//! events (`e3`, `e4`) need history: a ring buffer of truck/bucket distances
//! over the frames where both were seen, plus the last truck sighting.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{bbox_center_distance, DetectionClass, FrameDetections};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "e0")]
    VerticalBucketFound,
    #[serde(rename = "e1")]
    HorizontalBucketFound,
    #[serde(rename = "e2")]
    TruckFound,
    #[serde(rename = "e3")]
    BucketApproachingTruck,
    #[serde(rename = "e4")]
    TruckAway,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::VerticalBucketFound,
        EventKind::HorizontalBucketFound,
        EventKind::TruckFound,
        EventKind::BucketApproachingTruck,
        EventKind::TruckAway,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        ["e0", "e1", "e2", "e3", "e4"][self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::VerticalBucketFound => "vertical_bucket_found",
            EventKind::HorizontalBucketFound => "horizontal_bucket_found",
            EventKind::TruckFound => "truck_found",
            EventKind::BucketApproachingTruck => "bucket_approaching_truck",
            EventKind::TruckAway => "truck_away",
        }
    }

    pub fn is_simple(self) -> bool {
        self.index() < 3
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        EventKind::ALL
            .into_iter()
            .find(|k| k.code() == lower || k.name() == lower)
            .ok_or_else(|| s.to_string())
    }
}

/// One event occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub frame_index: u64,
    pub timestamp: f64,
}

/// Set of event kinds; iteration follows the fixed order `e0 < ... < e4`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EventSet(u8);

impl EventSet {
    pub fn new() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, kind: EventKind) {
        self.0 |= 1 << kind.index();
    }

    pub fn contains(&self, kind: EventKind) -> bool {
        self.0 & (1 << kind.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: EventSet) -> EventSet {
        EventSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = EventKind> + '_ {
        EventKind::ALL.into_iter().filter(|k| self.contains(*k))
    }
}

impl FromIterator<EventKind> for EventSet {
    fn from_iter<T: IntoIterator<Item = EventKind>>(iter: T) -> Self {
        let mut set = EventSet::new();
        for k in iter {
            set.insert(k);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventWindowConfig {
    /// Co-occurrence samples needed before a distance trend counts.
    pub min_cooccurrences: usize,
    /// Ring buffer capacity.
    pub window_length: usize,
    /// Processed frames without a truck before the absence form of `e4`.
    pub absence_gap: u64,
    /// Clear the distance buffer whenever a trend event fires.
    pub reset_window_on_event: bool,
}

impl Default for EventWindowConfig {
    fn default() -> Self {
        Self {
            min_cooccurrences: 3,
            window_length: 5,
            absence_gap: 1,
            reset_window_on_event: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("min_cooccurrences must be at least 2, got {0}")]
    MinCooccurrences(usize),
    #[error("window_length {window} shorter than min_cooccurrences {min}")]
    WindowTooShort { window: usize, min: usize },
    #[error("absence_gap must be at least 1")]
    ZeroAbsenceGap,
    #[error("frame {frame} arrived after frame {previous}")]
    OutOfOrder { frame: u64, previous: u64 },
}

impl EventWindowConfig {
    pub fn validate(&self) -> Result<(), EventError> {
        if self.min_cooccurrences < 2 {
            return Err(EventError::MinCooccurrences(self.min_cooccurrences));
        }
        if self.window_length < self.min_cooccurrences {
            return Err(EventError::WindowTooShort {
                window: self.window_length,
                min: self.min_cooccurrences,
            });
        }
        if self.absence_gap == 0 {
            return Err(EventError::ZeroAbsenceGap);
        }
        Ok(())
    }
}

/// Simple events present in one frame.
pub fn identify_simple_events(frame: &FrameDetections) -> EventSet {
    let mut set = EventSet::new();
    for d in &frame.detections {
        set.insert(match d.class {
            DetectionClass::BucketVertical => EventKind::VerticalBucketFound,
            DetectionClass::BucketHorizontal => EventKind::HorizontalBucketFound,
            DetectionClass::Truck => EventKind::TruckFound,
        });
    }
    set
}

/// Distance between the largest truck and the largest bucket of either pose,
/// when both are present.
pub fn cooccurrence_distance(frame: &FrameDetections) -> Option<f64> {
    let truck = frame.largest(|d| d.class == DetectionClass::Truck)?;
    let bucket = frame.largest(|d| d.class.is_bucket())?;
    Some(bbox_center_distance(&truck.bbox, &bucket.bbox))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Trend {
    Decreasing,
    Increasing,
}

fn trend_of(window: impl Iterator<Item = f64>) -> Option<Trend> {
    let values: Vec<f64> = window.collect();
    let pairs = || values.windows(2);
    if pairs().all(|w| w[1] < w[0]) {
        Some(Trend::Decreasing)
    } else if pairs().all(|w| w[1] > w[0]) {
        Some(Trend::Increasing)
    } else {
        None
    }
}

/// History needed for the relational events of a single stream.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoOccurrenceTracker {
    samples: VecDeque<(u64, f64)>,
    /// Frame index and processed-frame ordinal of the last truck sighting.
    last_truck_seen: Option<(u64, u64)>,
    truck_sightings: u64,
    processed: u64,
    last_frame: Option<u64>,
    // outcome of the most recent update
    sample_added: bool,
    trend: Option<Trend>,
    truck_departed: bool,
}

impl CoOccurrenceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn samples(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.samples.iter().copied()
    }

    pub fn last_truck_seen(&self) -> Option<u64> {
        self.last_truck_seen.map(|(frame, _)| frame)
    }

    pub fn truck_sightings(&self) -> u64 {
        self.truck_sightings
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    /// Folds one processed frame into the history.
    pub fn advance(
        &mut self,
        frame: &FrameDetections,
        cfg: &EventWindowConfig,
    ) -> Result<(), EventError> {
        if let Some(prev) = self.last_frame {
            if frame.frame_index <= prev {
                return Err(EventError::OutOfOrder {
                    frame: frame.frame_index,
                    previous: prev,
                });
            }
        }
        self.last_frame = Some(frame.frame_index);
        let ordinal = self.processed;
        self.processed += 1;
        self.sample_added = false;
        self.trend = None;
        self.truck_departed = false;

        if frame.has(DetectionClass::Truck) {
            self.last_truck_seen = Some((frame.frame_index, ordinal));
            self.truck_sightings += 1;
        } else if let Some((_, seen_at)) = self.last_truck_seen {
            if self.truck_sightings >= 1 && ordinal - seen_at >= cfg.absence_gap {
                self.truck_departed = true;
                self.last_truck_seen = None;
                self.truck_sightings = 0;
            }
        }

        if let Some(distance) = cooccurrence_distance(frame) {
            if self.samples.len() >= cfg.window_length.max(1) {
                self.samples.pop_front();
            }
            self.samples.push_back((frame.frame_index, distance));
            self.sample_added = true;
            let n = cfg.min_cooccurrences;
            if self.samples.len() >= n {
                let start = self.samples.len() - n;
                self.trend = trend_of(self.samples.range(start..).map(|s| s.1));
            }
            if self.trend.is_some() && cfg.reset_window_on_event {
                self.samples.clear();
            }
        }
        Ok(())
    }

    /// Relational events for the frame most recently passed to
    /// [`advance`](Self::advance). A distance trend is only reported on the
    /// frame that contributed the newest sample.
    pub fn complex_events(&self) -> EventSet {
        let mut set = EventSet::new();
        match self.trend {
            Some(Trend::Decreasing) if self.sample_added => {
                set.insert(EventKind::BucketApproachingTruck)
            }
            Some(Trend::Increasing) if self.sample_added => set.insert(EventKind::TruckAway),
            _ => {}
        }
        if self.truck_departed {
            set.insert(EventKind::TruckAway);
        }
        set
    }
}

/// Pure form of [`CoOccurrenceTracker::advance`].
pub fn update_tracker(
    tracker: &CoOccurrenceTracker,
    frame: &FrameDetections,
    cfg: &EventWindowConfig,
) -> Result<CoOccurrenceTracker, EventError> {
    let mut next = tracker.clone();
    next.advance(frame, cfg)?;
    Ok(next)
}

/// Relational events for `current_frame`, which must be the frame the
/// tracker was last updated with.
pub fn identify_complex_events(
    tracker: &CoOccurrenceTracker,
    current_frame: &FrameDetections,
) -> EventSet {
    if tracker.last_frame != Some(current_frame.frame_index) {
        return EventSet::new();
    }
    tracker.complex_events()
}

/// Per-stream event identification: one tracker plus its configuration.
#[derive(Debug, Clone)]
pub struct EventIdentifier {
    cfg: EventWindowConfig,
    tracker: CoOccurrenceTracker,
}

impl EventIdentifier {
    pub fn new(cfg: EventWindowConfig) -> Result<Self, EventError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracker: CoOccurrenceTracker::new(),
        })
    }

    pub fn tracker(&self) -> &CoOccurrenceTracker {
        &self.tracker
    }

    /// All events of one filtered frame in the fixed order `e0..e4`.
    pub fn events_for(&mut self, frame: &FrameDetections) -> Result<EventSet, EventError> {
        self.tracker.advance(frame, &self.cfg)?;
        Ok(identify_simple_events(frame).union(self.tracker.complex_events()))
    }

    /// Same as [`events_for`](Self::events_for) with each kind stamped with
    /// the frame's index and timestamp.
    pub fn process(&mut self, frame: &FrameDetections) -> Result<Vec<Event>, EventError> {
        let set = self.events_for(frame)?;
        Ok(set
            .iter()
            .map(|kind| Event {
                kind,
                frame_index: frame.frame_index,
                timestamp: frame.timestamp,
            })
            .collect())
    }
}

#[derive(Serialize)]
struct EventLine {
    frame: u64,
    t: f64,
    event: EventKind,
}

/// Writes `{"frame", "t", "event"}` lines.
pub fn write_event_trace<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(
            &mut out,
            &EventLine {
                frame: e.frame_index,
                t: e.timestamp,
                event: e.kind,
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
