//! Business state machine `next = f(state, event)`.
//!
//! Each state only reacts to the events listed for it in the transition
//! table; every other event is ignored, which is what keeps sporadic detector
//! mistakes from derailing the count. Reaching [`BusinessState::Unloaded`]
//! counts one workload and returns the machine to [`BusinessState::Digging`]
//! within the same step.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, EventKind, EventSet};

pub const DEFAULT_TABLE_TOML: &str = include_str!("../data/default_table.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum BusinessState {
    #[default]
    #[serde(rename = "s0")]
    Digging,
    #[serde(rename = "s1")]
    Carrying,
    #[serde(rename = "s2")]
    Approaching,
    #[serde(rename = "s3")]
    PossiblyUnloaded,
    #[serde(rename = "s4")]
    Unloaded,
}

impl BusinessState {
    pub const ALL: [BusinessState; 5] = [
        BusinessState::Digging,
        BusinessState::Carrying,
        BusinessState::Approaching,
        BusinessState::PossiblyUnloaded,
        BusinessState::Unloaded,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["s0", "s1", "s2", "s3", "s4"][self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            BusinessState::Digging => "digging",
            BusinessState::Carrying => "carrying",
            BusinessState::Approaching => "approaching",
            BusinessState::PossiblyUnloaded => "possibly_unloaded",
            BusinessState::Unloaded => "unloaded",
        }
    }
}

impl fmt::Display for BusinessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for BusinessState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        BusinessState::ALL
            .into_iter()
            .find(|st| st.code() == lower || st.name() == lower)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("transition table is not valid TOML: {0}")]
    Parse(String),
    #[error("transition {index}: unknown {role} {symbol:?}")]
    UnknownSymbol {
        index: usize,
        role: &'static str,
        symbol: String,
    },
    #[error("transition {index}: ({state}, {event}) is already mapped")]
    Duplicate {
        index: usize,
        state: BusinessState,
        event: EventKind,
    },
    #[error("no sequence of transitions leads from s0 to s4")]
    NoPathToUnloaded,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default)]
    transition: Vec<TransitionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    state: String,
    event: String,
    next: String,
}

/// Mapping `(state, event) -> next`. Missing pairs are self-loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionTable {
    arcs: [[Option<BusinessState>; 5]; 5],
}

impl Default for TransitionTable {
    fn default() -> Self {
        load_transition_table(DEFAULT_TABLE_TOML).expect("shipped default table is valid")
    }
}

impl TransitionTable {
    /// Builds and validates a table from `(state, event, next)` triples.
    pub fn from_arcs<I>(arcs: I) -> Result<Self, TableError>
    where
        I: IntoIterator<Item = (BusinessState, EventKind, BusinessState)>,
    {
        let mut table = TransitionTable {
            arcs: [[None; 5]; 5],
        };
        for (index, (state, event, next)) in arcs.into_iter().enumerate() {
            let slot = &mut table.arcs[state.index()][event.index()];
            if slot.is_some() {
                return Err(TableError::Duplicate {
                    index,
                    state,
                    event,
                });
            }
            *slot = Some(next);
        }
        table.validate()?;
        Ok(table)
    }

    pub fn get(&self, state: BusinessState, event: EventKind) -> Option<BusinessState> {
        self.arcs[state.index()][event.index()]
    }

    /// Events that appear as keys for `state`.
    pub fn valid_events(&self, state: BusinessState) -> EventSet {
        EventKind::ALL
            .into_iter()
            .filter(|e| self.get(state, *e).is_some())
            .collect()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (BusinessState, EventKind, BusinessState)> + '_ {
        BusinessState::ALL.into_iter().flat_map(move |s| {
            EventKind::ALL
                .into_iter()
                .filter_map(move |e| self.get(s, e).map(|n| (s, e, n)))
        })
    }

    pub fn len(&self) -> usize {
        self.arcs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<(), TableError> {
        let mut seen = [false; 5];
        let mut queue = VecDeque::from([BusinessState::Digging]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            if s == BusinessState::Unloaded {
                return Ok(());
            }
            for e in EventKind::ALL {
                if let Some(n) = self.get(s, e) {
                    if !seen[n.index()] {
                        seen[n.index()] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        Err(TableError::NoPathToUnloaded)
    }

    /// Serialises in the same `[[transition]]` dialect that
    /// [`load_transition_table`] reads.
    pub fn to_toml(&self) -> String {
        let file = TableFile {
            transition: self
                .arcs()
                .map(|(s, e, n)| TransitionEntry {
                    state: s.code().into(),
                    event: e.code().into(),
                    next: n.code().into(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("table serialises")
    }
}

pub fn load_transition_table(source: &str) -> Result<TransitionTable, TableError> {
    let file: TableFile = toml::from_str(source).map_err(|e| TableError::Parse(e.to_string()))?;
    let mut arcs = Vec::with_capacity(file.transition.len());
    for (index, t) in file.transition.iter().enumerate() {
        let state = t.state.parse().map_err(|symbol| TableError::UnknownSymbol {
            index,
            role: "state",
            symbol,
        })?;
        let event = t.event.parse().map_err(|symbol| TableError::UnknownSymbol {
            index,
            role: "event",
            symbol,
        })?;
        let next = t.next.parse().map_err(|symbol| TableError::UnknownSymbol {
            index,
            role: "state",
            symbol,
        })?;
        arcs.push((state, event, next));
    }
    TransitionTable::from_arcs(arcs)
}

/// One transition function application. Returns the externally visible next
/// state (`s0` after a count) and whether a workload was counted.
pub fn step(
    state: BusinessState,
    event: EventKind,
    table: &TransitionTable,
) -> (BusinessState, bool) {
    match table.get(state, event) {
        Some(BusinessState::Unloaded) => (BusinessState::Digging, true),
        Some(next) => (next, false),
        None => (state, false),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub event: EventKind,
    pub state_before: BusinessState,
    pub state_after: BusinessState,
    pub accepted: bool,
    pub counted: bool,
    #[serde(rename = "count")]
    pub workload_count_after: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FsmCheckpoint {
    pub state: BusinessState,
    pub workload_count: u64,
}

/// Streaming machine for one video stream.
#[derive(Debug, Clone)]
pub struct Fsm {
    table: TransitionTable,
    state: BusinessState,
    count: u64,
}

impl Fsm {
    pub fn new(table: TransitionTable) -> Self {
        Self::resume(table, FsmCheckpoint::default())
    }

    pub fn resume(table: TransitionTable, checkpoint: FsmCheckpoint) -> Self {
        Self {
            table,
            state: checkpoint.state,
            count: checkpoint.workload_count,
        }
    }

    pub fn checkpoint(&self) -> FsmCheckpoint {
        FsmCheckpoint {
            state: self.state,
            workload_count: self.count,
        }
    }

    pub fn state(&self) -> BusinessState {
        self.state
    }

    pub fn workload_count(&self) -> u64 {
        self.count
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn apply(&mut self, event: &Event) -> TraceRecord {
        let before = self.state;
        let accepted = self.table.get(before, event.kind).is_some();
        let (after, counted) = step(before, event.kind, &self.table);
        self.state = after;
        if counted {
            self.count += 1;
        }
        TraceRecord {
            frame_index: event.frame_index,
            timestamp: event.timestamp,
            event: event.kind,
            state_before: before,
            state_after: after,
            accepted,
            counted,
            workload_count_after: self.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsmRun {
    pub current_state: BusinessState,
    pub workload_count: u64,
    pub trace: Vec<TraceRecord>,
}

impl FsmRun {
    /// Timestamps of the steps that counted a workload.
    pub fn completion_times(&self) -> Vec<f64> {
        self.trace
            .iter()
            .filter(|r| r.counted)
            .map(|r| r.timestamp)
            .collect()
    }
}

pub fn run_fsm<I>(events: I, table: &TransitionTable) -> FsmRun
where
    I: IntoIterator<Item = Event>,
{
    let mut fsm = Fsm::new(*table);
    let trace: Vec<TraceRecord> = events.into_iter().map(|e| fsm.apply(&e)).collect();
    FsmRun {
        current_state: fsm.state(),
        workload_count: fsm.workload_count(),
        trace,
    }
}

pub fn write_fsm_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    for r in trace {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use BusinessState::*;
    use EventKind::*;

    fn ev(kind: EventKind, i: u64) -> Event {
        Event {
            kind,
            frame_index: i,
            timestamp: i as f64,
        }
    }

    fn seq(kinds: &[EventKind]) -> Vec<Event> {
        kinds.iter().enumerate().map(|(i, k)| ev(*k, i as u64)).collect()
    }

    #[test]
    fn default_table_arcs() {
        let t = TransitionTable::default();
        let arcs: Vec<_> = t.arcs().collect();
        assert_eq!(
            arcs,
            vec![
                (Digging, VerticalBucketFound, Digging),
                (Digging, HorizontalBucketFound, Carrying),
                (Carrying, VerticalBucketFound, Digging),
                (Carrying, BucketApproachingTruck, Approaching),
                (Approaching, VerticalBucketFound, PossiblyUnloaded),
                (Approaching, TruckAway, PossiblyUnloaded),
                (PossiblyUnloaded, VerticalBucketFound, Unloaded),
                (PossiblyUnloaded, BucketApproachingTruck, Approaching),
                (PossiblyUnloaded, TruckAway, Unloaded),
            ]
        );
        let valid: Vec<_> = t.valid_events(Digging).iter().collect();
        assert_eq!(valid, vec![VerticalBucketFound, HorizontalBucketFound]);
    }

    #[test]
    fn step_examples() {
        let t = TransitionTable::default();
        assert_eq!(step(Digging, TruckFound, &t), (Digging, false));
        assert_eq!(step(Digging, HorizontalBucketFound, &t), (Carrying, false));
        assert_eq!(step(PossiblyUnloaded, VerticalBucketFound, &t), (Digging, true));
    }

    #[test]
    fn run_examples() {
        let t = TransitionTable::default();
        let empty = run_fsm(Vec::new(), &t);
        assert_eq!((empty.workload_count, empty.current_state), (0, Digging));

        let cycle = run_fsm(
            seq(&[HorizontalBucketFound, BucketApproachingTruck, TruckAway, VerticalBucketFound]),
            &t,
        );
        assert_eq!((cycle.workload_count, cycle.current_state), (1, Digging));
        let path: Vec<_> = cycle.trace.iter().map(|r| r.state_after).collect();
        assert_eq!(path, vec![Carrying, Approaching, PossiblyUnloaded, Digging]);
        assert!(cycle.trace[3].counted);
        assert_eq!(cycle.completion_times(), vec![3.0]);

        let trucks = run_fsm(seq(&[TruckFound, TruckFound, TruckFound]), &t);
        assert_eq!((trucks.workload_count, trucks.current_state), (0, Digging));
        assert!(trucks.trace.iter().all(|r| !r.accepted));
    }

    #[test]
    fn load_errors() {
        let bad = "[[transition]]\nstate = \"s9\"\nevent = \"e0\"\nnext = \"s1\"\n";
        assert!(matches!(
            load_transition_table(bad),
            Err(TableError::UnknownSymbol { role: "state", ref symbol, .. }) if symbol == "s9"
        ));
        let bad_event = "[[transition]]\nstate = \"s0\"\nevent = \"e7\"\nnext = \"s1\"\n";
        assert!(matches!(
            load_transition_table(bad_event),
            Err(TableError::UnknownSymbol { role: "event", .. })
        ));
        let loops = "[[transition]]\nstate = \"s0\"\nevent = \"e0\"\nnext = \"s0\"\n\
                     [[transition]]\nstate = \"s1\"\nevent = \"e1\"\nnext = \"s1\"\n";
        assert_eq!(load_transition_table(loops), Err(TableError::NoPathToUnloaded));
        assert_eq!(load_transition_table(""), Err(TableError::NoPathToUnloaded));
        assert!(matches!(
            load_transition_table("[[transition]\n"),
            Err(TableError::Parse(_))
        ));
        let dup = "[[transition]]\nstate = \"s0\"\nevent = \"e1\"\nnext = \"s4\"\n\
                   [[transition]]\nstate = \"s0\"\nevent = \"e1\"\nnext = \"s1\"\n";
        assert!(matches!(
            load_transition_table(dup),
            Err(TableError::Duplicate { index: 1, .. })
        ));
    }

    #[test]
    fn names_are_accepted() {
        let src = "[[transition]]\nstate = \"digging\"\nevent = \"truck_found\"\nnext = \"unloaded\"\n";
        let t = load_transition_table(src).unwrap();
        assert_eq!(t.get(Digging, TruckFound), Some(Unloaded));
    }

    #[test]
    fn toml_round_trip_of_default() {
        let t = TransitionTable::default();
        assert_eq!(load_transition_table(&t.to_toml()).unwrap(), t);
    }

    #[test]
    fn checkpoint_resume_matches_uninterrupted() {
        let t = TransitionTable::default();
        let events = seq(&[
            HorizontalBucketFound,
            BucketApproachingTruck,
            VerticalBucketFound,
            VerticalBucketFound,
            HorizontalBucketFound,
            BucketApproachingTruck,
            TruckAway,
        ]);
        let full = run_fsm(events.clone(), &t);
        let mut first = Fsm::new(t);
        for e in &events[..3] {
            first.apply(e);
        }
        let mut second = Fsm::resume(t, first.checkpoint());
        for e in &events[3..] {
            second.apply(e);
        }
        assert_eq!(second.state(), full.current_state);
        assert_eq!(second.workload_count(), full.workload_count);
    }

    #[test]
    fn trace_lines_are_stable() {
        let t = TransitionTable::default();
        let run = run_fsm(seq(&[HorizontalBucketFound]), &t);
        let mut buf = Vec::new();
        write_fsm_trace(&mut buf, &run.trace).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"frame\":0,\"t\":0.0,\"event\":\"e1\",\"state_before\":\"s0\",\"state_after\":\"s1\",\"accepted\":true,\"counted\":false,\"count\":0}\n"
        );
    }
}
