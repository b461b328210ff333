mod common;

use common::{detection, frames};
use digcount_core::detection::{
    apply_stride, bbox_center_distance, filter_by_confidence, parse_detection_stream, top1_per_class,
    write_detection_stream, BoundingBox, DetectionReader, FillGaps, FrameDetections, StreamError,
};
use proptest::prelude::*;
use serde_json::json;

fn frame_of(detections: Vec<digcount_core::Detection>) -> FrameDetections {
    FrameDetections {
        frame_index: 0,
        timestamp: 0.0,
        detections,
    }
}

proptest! {
    #[test]
    fn stride_keeps_ceil_n_over_k(n in 0..200usize, k in 1..12usize) {
        let kept: Vec<usize> = apply_stride(0..n, k).unwrap().collect();
        prop_assert_eq!(kept.len(), n.div_ceil(k));
        prop_assert!(kept.iter().all(|i| i % k == 0));
    }

    #[test]
    fn top1_is_idempotent_and_one_per_class(dets in prop::collection::vec(detection(), 0..10)) {
        let f = frame_of(dets);
        let once = top1_per_class(&f);
        prop_assert_eq!(&top1_per_class(&once), &once);
        for c in digcount_core::DetectionClass::ALL {
            let n = once.detections.iter().filter(|d| d.class == c).count();
            prop_assert_eq!(n, usize::from(f.has(c)));
            if let Some(kept) = once.detections.iter().find(|d| d.class == c) {
                prop_assert!(f.detections.iter().filter(|d| d.class == c).all(|d| d.confidence <= kept.confidence));
            }
        }
    }

    #[test]
    fn confidence_filter_is_monotone(dets in prop::collection::vec(detection(), 0..10), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f = frame_of(dets);
        let strict = filter_by_confidence(&f, hi);
        let loose = filter_by_confidence(&f, lo);
        prop_assert!(strict.detections.len() <= loose.detections.len());
        prop_assert!(strict.detections.iter().all(|d| loose.detections.contains(d)));
        prop_assert!(strict.detections.iter().all(|d| d.confidence >= hi));
    }

    #[test]
    fn center_distance_is_a_metric(a in detection(), b in detection(), c in detection()) {
        let (a, b, c) = (a.bbox, b.bbox, c.bbox);
        prop_assert!(bbox_center_distance(&a, &a) == 0.0);
        prop_assert_eq!(bbox_center_distance(&a, &b), bbox_center_distance(&b, &a));
        prop_assert!(bbox_center_distance(&a, &c) <= bbox_center_distance(&a, &b) + bbox_center_distance(&b, &c) + 1e-9);
    }

    #[test]
    fn wire_round_trip(stream in frames(30, 4)) {
        let mut buf = Vec::new();
        let header = json!({"video": "v1"});
        write_detection_stream(&mut buf, Some(&header), &stream).unwrap();
        let mut reader = DetectionReader::new(buf.as_slice(), 25.0);
        let back: Vec<FrameDetections> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, stream);
        prop_assert_eq!(reader.header(), Some(&header));
    }

    #[test]
    fn gap_filling_makes_indices_contiguous(stream in frames(30, 2)) {
        let filled: Vec<FrameDetections> = FillGaps::new(stream.iter().cloned().map(Ok::<_, StreamError>), 25.0)
            .collect::<Result<_, _>>()
            .unwrap();
        if let (Some(first), Some(last)) = (stream.first(), stream.last()) {
            prop_assert_eq!(filled.len() as u64, last.frame_index - first.frame_index + 1);
        }
        prop_assert!(filled.windows(2).all(|w| w[1].frame_index == w[0].frame_index + 1));
        prop_assert!(stream.iter().all(|f| filled.contains(f)));
    }
}

#[test]
fn malformed_line_is_reported_with_its_number() {
    let text = "{\"frame\":0,\"class\":\"truck\",\"x\":0,\"y\":0,\"w\":1,\"h\":1,\"conf\":0.9}\n\nnot json\n";
    let err = parse_detection_stream(text, 25.0).unwrap_err();
    assert_eq!(err.line(), 3);
    assert!(err.to_string().starts_with("line 3"));
}

#[test]
fn box_validation() {
    assert!(BoundingBox::new(0.0, 0.0, -1.0, 2.0).is_err());
    assert!(BoundingBox::new(0.0, 0.0, 1.0, 2.0).is_ok());
}
