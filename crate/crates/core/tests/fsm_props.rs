mod common;
mod oracles;

use common::{event_kinds, stamp, valid_table};
use digcount_core::events::{Event, EventKind};
use digcount_core::fsm::{load_transition_table, run_fsm, step, BusinessState, Fsm, TableError, TransitionTable};
use proptest::prelude::*;

proptest! {
    #[test]
    fn matches_naive_interpreter((table, triples) in valid_table(), kinds in event_kinds(100)) {
        let run = run_fsm(stamp(&kinds), &table);
        let idx: Vec<usize> = kinds.iter().map(|k| k.index()).collect();
        let (steps, count, last) = oracles::naive_fsm(&triples, &idx);
        prop_assert_eq!(run.workload_count, count);
        prop_assert_eq!(run.current_state.index(), last);
        for (r, n) in run.trace.iter().zip(&steps) {
            prop_assert_eq!(
                (r.state_before.index(), r.state_after.index(), r.accepted, r.counted),
                (n.before, n.after, n.accepted, n.counted)
            );
        }
    }

    #[test]
    fn rectification_on_random_tables((table, _) in valid_table()) {
        for s in BusinessState::ALL {
            for e in EventKind::ALL {
                let (next, counted) = step(s, e, &table);
                match table.get(s, e) {
                    None => prop_assert_eq!((next, counted), (s, false)),
                    Some(BusinessState::Unloaded) => prop_assert_eq!((next, counted), (BusinessState::Digging, true)),
                    Some(n) => prop_assert_eq!((next, counted), (n, false)),
                }
                if s != BusinessState::Unloaded {
                    prop_assert!(next != BusinessState::Unloaded);
                }
            }
        }
    }

    #[test]
    fn count_never_decreases_and_resume_is_seamless((table, _) in valid_table(), kinds in event_kinds(100), cut in 0..100usize) {
        let events = stamp(&kinds);
        let cut = cut.min(events.len());
        let whole = run_fsm(events.iter().copied(), &table);
        prop_assert!(whole.trace.windows(2).all(|w| w[1].workload_count_after >= w[0].workload_count_after));
        prop_assert!(whole.trace.iter().all(|r| r.counted == (r.workload_count_after > 0 && r.state_after == BusinessState::Digging && r.accepted && table.get(r.state_before, r.event) == Some(BusinessState::Unloaded))));

        let mut first = Fsm::new(table);
        events[..cut].iter().for_each(|e| { first.apply(e); });
        // a checkpoint survives a serialisation round trip
        let saved = serde_json::to_string(&first.checkpoint()).unwrap();
        let mut second = Fsm::resume(table, serde_json::from_str(&saved).unwrap());
        let tail: Vec<_> = events[cut..].iter().map(|e| second.apply(e)).collect();
        prop_assert_eq!(&tail[..], &whole.trace[cut..]);
        prop_assert_eq!(second.workload_count(), whole.workload_count);
    }

    #[test]
    fn toml_round_trip((table, _) in valid_table()) {
        prop_assert_eq!(load_transition_table(&table.to_toml()).unwrap(), table);
    }
}

#[test]
fn default_table_grid() {
    let table = TransitionTable::default();
    assert_eq!(table.len(), 9);
    let mut accepted = 0;
    for s in BusinessState::ALL {
        for e in EventKind::ALL {
            let (next, counted) = step(s, e, &table);
            match table.get(s, e) {
                None => assert_eq!((next, counted), (s, false), "{s} {e}"),
                Some(_) => accepted += 1,
            }
            if counted {
                assert_eq!(next, BusinessState::Digging);
            }
        }
    }
    assert_eq!(accepted, 9);
}

#[test]
fn default_table_counts_a_cycle() {
    use EventKind::*;
    let kinds = [
        VerticalBucketFound,
        HorizontalBucketFound,
        TruckFound,
        BucketApproachingTruck,
        VerticalBucketFound,
        VerticalBucketFound,
    ];
    let run = run_fsm(stamp(&kinds), &TransitionTable::default());
    assert_eq!(run.workload_count, 1);
    assert_eq!(run.completion_times(), vec![5.0]);
    assert_eq!(run.current_state, BusinessState::Digging);
}

#[test]
fn table_errors() {
    let no_path = "[[transition]]\nstate = \"s0\"\nevent = \"e1\"\nnext = \"s1\"\n";
    assert!(matches!(load_transition_table(no_path), Err(TableError::NoPathToUnloaded)));
    let unknown = "[[transition]]\nstate = \"s9\"\nevent = \"e1\"\nnext = \"s4\"\n";
    assert!(matches!(load_transition_table(unknown), Err(TableError::UnknownSymbol { .. })));
    let dup = "[[transition]]\nstate = \"s0\"\nevent = \"e1\"\nnext = \"s4\"\n[[transition]]\nstate = \"s0\"\nevent = \"e1\"\nnext = \"s1\"\n";
    assert!(matches!(load_transition_table(dup), Err(TableError::Duplicate { .. })));
    assert!(matches!(load_transition_table("[[transition"), Err(TableError::Parse(_))));
}

#[test]
fn ignored_events_leave_no_mark() {
    let table = TransitionTable::default();
    let mut fsm = Fsm::new(table);
    let rec = fsm.apply(&Event { kind: EventKind::TruckFound, frame_index: 3, timestamp: 0.12 });
    assert!(!rec.accepted && !rec.counted);
    assert_eq!(rec.state_after, BusinessState::Digging);
}
