//! Reference implementations written for clarity rather than speed. They
//! share no code with the library beyond its plain data types.
#![allow(dead_code)]

use digcount_core::detection::{DetectionClass, FrameDetections};

/// Table row as plain indices: `(state, event, next)`.
pub type Arc = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveStep {
    pub before: usize,
    pub after: usize,
    pub accepted: bool,
    pub counted: bool,
}

/// Linear scan over the arc list for every event; state 4 is counted and
/// replaced by state 0.
pub fn naive_fsm(arcs: &[Arc], events: &[usize]) -> (Vec<NaiveStep>, u64, usize) {
    let mut state = 0;
    let mut count = 0;
    let mut steps = Vec::new();
    for &e in events {
        let before = state;
        let mut accepted = false;
        let mut counted = false;
        for &(s, ev, next) in arcs {
            if s == state && ev == e {
                accepted = true;
                if next == 4 {
                    counted = true;
                    count += 1;
                    state = 0;
                } else {
                    state = next;
                }
                break;
            }
        }
        steps.push(NaiveStep {
            before,
            after: state,
            accepted,
            counted,
        });
    }
    (steps, count, state)
}

/// Threshold baseline re-derived from its description.
pub fn naive_heuristic(events: &[usize], v_th: u64, h_th: u64) -> Vec<usize> {
    let (mut v, mut h) = (0u64, 0u64);
    let mut counted_at = Vec::new();
    for (i, &e) in events.iter().enumerate() {
        if e == 0 {
            v += 1;
        } else if e == 1 {
            h += 1;
            if v >= v_th && h >= h_th {
                counted_at.push(i);
                h = 0;
            }
            v = 0;
        }
    }
    counted_at
}

fn largest_index(frame: &FrameDetections, want: impl Fn(DetectionClass) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, d) in frame.detections.iter().enumerate() {
        if !want(d.class) {
            continue;
        }
        let area = d.bbox.w * d.bbox.h;
        match best {
            Some(j) if frame.detections[j].bbox.w * frame.detections[j].bbox.h >= area => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn distance(frame: &FrameDetections) -> Option<f64> {
    let t = &frame.detections[largest_index(frame, |c| c == DetectionClass::Truck)?];
    let b = &frame.detections[largest_index(frame, |c| c != DetectionClass::Truck)?];
    let dx = (t.bbox.x + t.bbox.w / 2.0) - (b.bbox.x + b.bbox.w / 2.0);
    let dy = (t.bbox.y + t.bbox.h / 2.0) - (b.bbox.y + b.bbox.h / 2.0);
    Some((dx * dx + dy * dy).sqrt())
}

fn has_truck(frame: &FrameDetections) -> bool {
    frame.detections.iter().any(|d| d.class == DetectionClass::Truck)
}

/// Events `e0..e4` per processed frame, recomputed from the whole history at
/// every frame (rolling window, no reset on events).
pub fn brute_force_events(frames: &[FrameDetections], n: usize, gap: usize) -> Vec<[bool; 5]> {
    let mut out = Vec::new();
    for j in 0..frames.len() {
        let f = &frames[j];
        let mut ev = [false; 5];
        for d in &f.detections {
            match d.class {
                DetectionClass::BucketVertical => ev[0] = true,
                DetectionClass::BucketHorizontal => ev[1] = true,
                DetectionClass::Truck => ev[2] = true,
            }
        }
        if distance(f).is_some() {
            let history: Vec<f64> = frames[..=j].iter().filter_map(distance).collect();
            if history.len() >= n {
                let tail = &history[history.len() - n..];
                if (1..n).all(|k| tail[k] < tail[k - 1]) {
                    ev[3] = true;
                }
                if (1..n).all(|k| tail[k] > tail[k - 1]) {
                    ev[4] = true;
                }
            }
        }
        if !has_truck(f) {
            if let Some(last) = (0..j).rev().find(|&i| has_truck(&frames[i])) {
                if j - last == gap {
                    ev[4] = true;
                }
            }
        }
        out.push(ev);
    }
    out
}

/// Maximum one-to-one matching with `|p - t| <= tol`, by exhaustive search
/// over which truth each prediction takes (memoised on the used-truth set).
pub fn max_matching(pred: &[f64], truth: &[f64], tol: f64) -> u64 {
    assert!(truth.len() <= 16);
    fn go(i: usize, used: u32, pred: &[f64], truth: &[f64], tol: f64, memo: &mut Vec<Option<u64>>) -> u64 {
        if i == pred.len() {
            return 0;
        }
        let key = i * (1 << truth.len()) + used as usize;
        if let Some(v) = memo[key] {
            return v;
        }
        let mut best = go(i + 1, used, pred, truth, tol, memo);
        for (j, t) in truth.iter().enumerate() {
            if used & (1 << j) == 0 && (pred[i] - t).abs() <= tol {
                best = best.max(1 + go(i + 1, used | (1 << j), pred, truth, tol, memo));
            }
        }
        memo[key] = Some(best);
        best
    }
    let mut memo = vec![None; (pred.len() + 1) * (1 << truth.len())];
    go(0, 0, pred, truth, tol, &mut memo)
}

/// All nondecreasing sequences of length `0..=max_len` over `grid`.
pub fn sorted_lists(grid: &[f64], max_len: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (list, from) in &frontier {
            for (g, &v) in grid.iter().enumerate().skip(*from) {
                let mut l = list.clone();
                l.push(v);
                out.push(l.clone());
                next.push((l, g));
            }
        }
        frontier = next;
    }
    out
}

/// One published per-video row: ground truth, then `(CT, P, R, F1)` for the
/// heuristic rules and for the state machine.
pub struct PublishedRow {
    pub video: u32,
    pub tr: u64,
    pub heuristic: (u64, f64, f64, f64),
    pub fsm: (u64, f64, f64, f64),
}

pub const PUBLISHED: [PublishedRow; 12] = [
    PublishedRow { video: 1, tr: 39, heuristic: (40, 0.95, 0.97, 0.96), fsm: (38, 1.00, 0.97, 0.99) },
    PublishedRow { video: 2, tr: 35, heuristic: (35, 1.00, 1.00, 1.00), fsm: (34, 1.00, 0.97, 0.99) },
    PublishedRow { video: 3, tr: 32, heuristic: (39, 0.82, 1.00, 0.90), fsm: (36, 0.89, 1.00, 0.94) },
    PublishedRow { video: 4, tr: 32, heuristic: (34, 0.94, 1.00, 0.97), fsm: (32, 0.97, 0.97, 0.97) },
    PublishedRow { video: 5, tr: 31, heuristic: (35, 0.89, 1.00, 0.94), fsm: (31, 1.00, 1.00, 1.00) },
    PublishedRow { video: 6, tr: 30, heuristic: (31, 0.97, 1.00, 0.98), fsm: (31, 0.97, 1.00, 0.98) },
    PublishedRow { video: 7, tr: 29, heuristic: (24, 1.00, 0.83, 0.91), fsm: (26, 0.96, 0.86, 0.91) },
    PublishedRow { video: 8, tr: 27, heuristic: (31, 0.84, 0.96, 0.90), fsm: (26, 0.96, 0.93, 0.94) },
    PublishedRow { video: 9, tr: 25, heuristic: (20, 0.95, 0.76, 0.84), fsm: (20, 1.00, 0.80, 0.89) },
    PublishedRow { video: 10, tr: 24, heuristic: (27, 0.91, 0.96, 0.90), fsm: (21, 0.95, 0.83, 0.89) },
    PublishedRow { video: 11, tr: 23, heuristic: (21, 0.95, 0.86, 0.91), fsm: (20, 1.00, 0.87, 0.93) },
    PublishedRow { video: 12, tr: 22, heuristic: (28, 0.75, 0.95, 0.84), fsm: (24, 0.83, 0.91, 0.87) },
];

/// Published average rows as `(P, R, F1)`: heuristic rules, state machine.
pub const PUBLISHED_AVG: [(f64, f64, f64); 2] = [(0.91, 0.94, 0.92), (0.96, 0.93, 0.94)];

/// Published fake / missing totals per method.
pub const PUBLISHED_FAKE: [(&str, u64); 3] = [("fsm", 13), ("strict", 14), ("loose", 34)];
pub const PUBLISHED_MISSING: [(&str, u64); 2] = [("fsm", 23), ("strict", 47)];

/// Match counts behind a published `(Tr, CT, R)`: the recall fixes TP.
pub fn counts_from_row(tr: u64, ct: u64, recall: f64) -> (u64, u64, u64) {
    let tp = (recall * tr as f64).round() as u64;
    (tp, ct - tp, tr - tp)
}
