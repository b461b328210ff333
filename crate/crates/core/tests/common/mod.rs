//! Proptest strategies shared by the integration tests.
#![allow(dead_code)]

use digcount_core::detection::{BoundingBox, Detection, DetectionClass, FrameDetections};
use digcount_core::events::{Event, EventKind};
use digcount_core::fsm::{BusinessState, TransitionTable};
use proptest::prelude::*;

pub fn class() -> impl Strategy<Value = DetectionClass> {
    prop_oneof![
        Just(DetectionClass::Truck),
        Just(DetectionClass::BucketVertical),
        Just(DetectionClass::BucketHorizontal),
    ]
}

/// Coarse coordinates so equal distances and equal areas actually happen.
pub fn detection() -> impl Strategy<Value = Detection> {
    (class(), 0..8u8, 0..8u8, 1..4u8, 1..4u8, 0..5u8).prop_map(|(class, x, y, w, h, c)| Detection {
        class,
        bbox: BoundingBox {
            x: f64::from(x) * 40.0,
            y: f64::from(y) * 40.0,
            w: f64::from(w) * 30.0,
            h: f64::from(h) * 30.0,
        },
        confidence: 0.3 + 0.15 * f64::from(c),
    })
}

/// Frames with strictly increasing indices (gaps allowed).
pub fn frames(max_len: usize, max_dets: usize) -> impl Strategy<Value = Vec<FrameDetections>> {
    prop::collection::vec((1..3u64, prop::collection::vec(detection(), 0..=max_dets)), 0..=max_len).prop_map(
        |raw| {
            let mut index = 0;
            raw.into_iter()
                .map(|(step, detections)| {
                    index += step;
                    FrameDetections {
                        frame_index: index,
                        timestamp: index as f64 / 25.0,
                        detections,
                    }
                })
                .collect()
        },
    )
}

pub fn event_kinds(max_len: usize) -> impl Strategy<Value = Vec<EventKind>> {
    prop::collection::vec((0..5usize).prop_map(|i| EventKind::from_index(i).unwrap()), 0..=max_len)
}

pub fn stamp(kinds: &[EventKind]) -> Vec<Event> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| Event {
            kind: *k,
            frame_index: i as u64,
            timestamp: i as f64,
        })
        .collect()
}

/// Any table that passes validation, as both the library value and raw
/// index triples.
pub fn valid_table() -> impl Strategy<Value = (TransitionTable, Vec<(usize, usize, usize)>)> {
    prop::collection::vec(prop::option::weighted(0.35, 0..5usize), 25).prop_filter_map(
        "table must reach the unloaded state",
        |cells| {
            let triples: Vec<(usize, usize, usize)> = cells
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|n| (i / 5, i % 5, n)))
                .collect();
            let arcs = triples.iter().map(|&(s, e, n)| {
                (BusinessState::ALL[s], EventKind::ALL[e], BusinessState::ALL[n])
            });
            TransitionTable::from_arcs(arcs).ok().map(|t| (t, triples))
        },
    )
}
