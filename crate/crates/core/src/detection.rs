//! Per-frame detection records: parsing, validation and the filtering stages
//! that turn raw detector output into a clean, strided, one-per-class stream.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Frames per second assumed when a record carries no timestamp.
pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    Truck,
    BucketVertical,
    BucketHorizontal,
}

impl DetectionClass {
    pub const ALL: [DetectionClass; 3] = [
        DetectionClass::Truck,
        DetectionClass::BucketVertical,
        DetectionClass::BucketHorizontal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionClass::Truck => "truck",
            DetectionClass::BucketVertical => "bucket_vertical",
            DetectionClass::BucketHorizontal => "bucket_horizontal",
        }
    }

    pub fn is_bucket(self) -> bool {
        matches!(
            self,
            DetectionClass::BucketVertical | DetectionClass::BucketHorizontal
        )
    }

    fn index(self) -> usize {
        match self {
            DetectionClass::Truck => 0,
            DetectionClass::BucketVertical => 1,
            DetectionClass::BucketHorizontal => 2,
        }
    }
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown detection class {0:?}")]
pub struct UnknownClass(pub String);

impl FromStr for DetectionClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truck" => Ok(DetectionClass::Truck),
            "bucket_vertical" => Ok(DetectionClass::BucketVertical),
            "bucket_horizontal" => Ok(DetectionClass::BucketHorizontal),
            other => Err(UnknownClass(other.to_string())),
        }
    }
}

/// Axis-aligned box in pixel coordinates, `(x, y)` being the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(format!("non-finite position ({x}, {y})"));
        }
        if !(w.is_finite() && w > 0.0 && h.is_finite() && h > 0.0) {
            return Err(format!("width and height must be positive, got {w}x{h}"));
        }
        Ok(Self { x, y, w, h })
    }

    /// Box of size `w`x`h` centred on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

/// Euclidean distance between the two box centres, in pixels.
pub fn bbox_center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: DetectionClass,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub timestamp: f64,
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn empty(frame_index: u64, timestamp: f64) -> Self {
        Self {
            frame_index,
            timestamp,
            detections: Vec::new(),
        }
    }

    pub fn has(&self, class: DetectionClass) -> bool {
        self.detections.iter().any(|d| d.class == class)
    }

    /// Largest-area detection matching `pred`; earlier detections win ties.
    pub fn largest<F>(&self, pred: F) -> Option<&Detection>
    where
        F: Fn(&Detection) -> bool,
    {
        let mut best: Option<&Detection> = None;
        for d in self.detections.iter().filter(|d| pred(d)) {
            match best {
                Some(b) if b.bbox.area() >= d.bbox.area() => {}
                _ => best = Some(d),
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub confidence_threshold: f64,
    /// Carried for compatibility with detector configs. The stream is assumed
    /// to be post-NMS so this value is never applied.
    pub iou_threshold: f64,
    pub stride: usize,
    pub one_per_class: bool,
    /// Used to synthesise timestamps for records that omit `t`.
    pub fps: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.5,
            iou_threshold: 0.45,
            stride: 5,
            one_per_class: true,
            fps: DEFAULT_FPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterConfigError {
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("confidence threshold {0} outside [0, 1]")]
    ConfidenceThreshold(f64),
    #[error("IoU threshold {0} outside [0, 1]")]
    IouThreshold(f64),
    #[error("fps must be positive, got {0}")]
    Fps(f64),
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterConfigError> {
        if self.stride == 0 {
            return Err(FilterConfigError::ZeroStride);
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(FilterConfigError::ConfidenceThreshold(
                self.confidence_threshold,
            ));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(FilterConfigError::IouThreshold(self.iou_threshold));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(FilterConfigError::Fps(self.fps));
        }
        Ok(())
    }

    /// Confidence filter followed by the one-per-class policy when enabled.
    pub fn clean(&self, frame: &FrameDetections) -> FrameDetections {
        let kept = filter_by_confidence(frame, self.confidence_threshold);
        if self.one_per_class {
            top1_per_class(&kept)
        } else {
            kept
        }
    }
}

/// Keeps the detections with `confidence >= threshold`.
pub fn filter_by_confidence(frame: &FrameDetections, threshold: f64) -> FrameDetections {
    FrameDetections {
        frame_index: frame.frame_index,
        timestamp: frame.timestamp,
        detections: frame
            .detections
            .iter()
            .filter(|d| d.confidence >= threshold)
            .copied()
            .collect(),
    }
}

/// Keeps at most one detection per class: highest confidence, then larger
/// area, then earliest in the input. Survivors keep their input order.
pub fn top1_per_class(frame: &FrameDetections) -> FrameDetections {
    let mut best: [Option<usize>; 3] = [None; 3];
    for (i, d) in frame.detections.iter().enumerate() {
        let slot = &mut best[d.class.index()];
        let replace = match *slot {
            None => true,
            Some(j) => {
                let cur = &frame.detections[j];
                d.confidence > cur.confidence
                    || (d.confidence == cur.confidence && d.bbox.area() > cur.bbox.area())
            }
        };
        if replace {
            *slot = Some(i);
        }
    }
    let mut keep: Vec<usize> = best.iter().flatten().copied().collect();
    keep.sort_unstable();
    FrameDetections {
        frame_index: frame.frame_index,
        timestamp: frame.timestamp,
        detections: keep.into_iter().map(|i| frame.detections[i]).collect(),
    }
}

/// Iterator adapter keeping the frames at positions `0, k, 2k, ...`.
#[derive(Debug, Clone)]
pub struct Stride<I> {
    inner: I,
    k: usize,
    position: usize,
}

impl<I: Iterator> Iterator for Stride<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let item = self.inner.next()?;
            let pos = self.position;
            self.position += 1;
            if pos.is_multiple_of(self.k) {
                return Some(item);
            }
        }
    }
}

pub fn apply_stride<I>(stream: I, k: usize) -> Result<Stride<I::IntoIter>, FilterConfigError>
where
    I: IntoIterator,
{
    if k == 0 {
        return Err(FilterConfigError::ZeroStride);
    }
    Ok(Stride {
        inner: stream.into_iter(),
        k,
        position: 0,
    })
}

/// Inserts empty frames for indices missing between two observed frames so
/// that omitted frames still count as frames for adjacency and striding.
#[derive(Debug)]
pub struct FillGaps<I> {
    inner: I,
    fps: f64,
    next_index: Option<u64>,
    held: Option<FrameDetections>,
}

impl<I> FillGaps<I> {
    pub fn new(inner: I, fps: f64) -> Self {
        Self {
            inner,
            fps,
            next_index: None,
            held: None,
        }
    }
}

impl<I, E> Iterator for FillGaps<I>
where
    I: Iterator<Item = Result<FrameDetections, E>>,
{
    type Item = Result<FrameDetections, E>;

    fn next(&mut self) -> Option<Self::Item> {
        let frame = match self.held.take() {
            Some(f) => f,
            None => match self.inner.next()? {
                Ok(f) => f,
                Err(e) => return Some(Err(e)),
            },
        };
        if let Some(expected) = self.next_index {
            if frame.frame_index > expected {
                self.held = Some(frame);
                self.next_index = Some(expected + 1);
                return Some(Ok(FrameDetections::empty(
                    expected,
                    expected as f64 / self.fps,
                )));
            }
        }
        self.next_index = Some(frame.frame_index + 1);
        Some(Ok(frame))
    }
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: malformed record: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown class {class:?}")]
    UnknownClass { line: usize, class: String },
    #[error("line {line}: confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { line: usize, value: f64 },
    #[error("line {line}: invalid bounding box: {message}")]
    InvalidBox { line: usize, message: String },
    #[error("line {line}: frame index {frame} after frame {previous}")]
    FrameRegression { line: usize, frame: u64, previous: u64 },
    #[error("line {line}: timestamp {timestamp} earlier than {previous}")]
    TimestampRegression {
        line: usize,
        timestamp: f64,
        previous: f64,
    },
    #[error("line {line}: read failed: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
}

impl StreamError {
    pub fn line(&self) -> usize {
        match self {
            StreamError::Syntax { line, .. }
            | StreamError::UnknownClass { line, .. }
            | StreamError::ConfidenceOutOfRange { line, .. }
            | StreamError::InvalidBox { line, .. }
            | StreamError::FrameRegression { line, .. }
            | StreamError::TimestampRegression { line, .. }
            | StreamError::Io { line, .. } => *line,
        }
    }
}

#[derive(Deserialize)]
struct WireRecord {
    frame: Option<u64>,
    t: Option<f64>,
    class: Option<String>,
    x: Option<f64>,
    y: Option<f64>,
    w: Option<f64>,
    h: Option<f64>,
    conf: Option<f64>,
    header: Option<Value>,
}

#[derive(Serialize)]
struct WireOut<'a> {
    frame: u64,
    t: f64,
    class: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conf: Option<f64>,
}

enum Parsed {
    Header(Value),
    Record {
        frame: u64,
        t: Option<f64>,
        detection: Option<Detection>,
    },
}

fn parse_line(line_no: usize, text: &str) -> Result<Parsed, StreamError> {
    let rec: WireRecord = serde_json::from_str(text).map_err(|e| StreamError::Syntax {
        line: line_no,
        message: e.to_string(),
    })?;
    if let Some(h) = rec.header {
        return Ok(Parsed::Header(h));
    }
    let frame = rec.frame.ok_or_else(|| StreamError::Syntax {
        line: line_no,
        message: "missing field `frame`".into(),
    })?;
    if let Some(t) = rec.t {
        if !(t.is_finite() && t >= 0.0) {
            return Err(StreamError::Syntax {
                line: line_no,
                message: format!("timestamp must be a nonnegative number, got {t}"),
            });
        }
    }
    let Some(class_name) = rec.class else {
        return Ok(Parsed::Record {
            frame,
            t: rec.t,
            detection: None,
        });
    };
    let class = class_name
        .parse::<DetectionClass>()
        .map_err(|e| StreamError::UnknownClass {
            line: line_no,
            class: e.0,
        })?;
    let field = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| StreamError::Syntax {
            line: line_no,
            message: format!("missing field `{name}`"),
        })
    };
    let (x, y, w, h) = (
        field(rec.x, "x")?,
        field(rec.y, "y")?,
        field(rec.w, "w")?,
        field(rec.h, "h")?,
    );
    let confidence = field(rec.conf, "conf")?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(StreamError::ConfidenceOutOfRange {
            line: line_no,
            value: confidence,
        });
    }
    let bbox = BoundingBox::new(x, y, w, h).map_err(|message| StreamError::InvalidBox {
        line: line_no,
        message,
    })?;
    Ok(Parsed::Record {
        frame,
        t: rec.t,
        detection: Some(Detection {
            class,
            bbox,
            confidence,
        }),
    })
}

/// Lazy reader over the line-delimited detection format, grouping
/// consecutive records that share a frame index into one
/// [`FrameDetections`]. Stops at the first error.
pub struct DetectionReader<R> {
    lines: std::io::Lines<R>,
    fps: f64,
    line_no: usize,
    current: Option<(FrameDetections, bool, usize)>,
    last_frame: Option<u64>,
    last_timestamp: f64,
    header: Option<Value>,
    done: bool,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(reader: R, fps: f64) -> Self {
        Self {
            lines: reader.lines(),
            fps,
            line_no: 0,
            current: None,
            last_frame: None,
            last_timestamp: 0.0,
            header: None,
            done: false,
        }
    }

    /// The `{"header": ...}` record, once it has been read.
    pub fn header(&self) -> Option<&Value> {
        self.header.as_ref()
    }

    fn emit(
        &mut self,
        (frame, _, line): (FrameDetections, bool, usize),
    ) -> Result<FrameDetections, StreamError> {
        if frame.timestamp < self.last_timestamp {
            self.done = true;
            return Err(StreamError::TimestampRegression {
                line,
                timestamp: frame.timestamp,
                previous: self.last_timestamp,
            });
        }
        self.last_timestamp = frame.timestamp;
        Ok(frame)
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<FrameDetections, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let Some(line) = self.lines.next() else {
                self.done = true;
                let last = self.current.take()?;
                return Some(self.emit(last));
            };
            self.line_no += 1;
            let line_no = self.line_no;
            let text = match line {
                Ok(t) => t,
                Err(source) => {
                    self.done = true;
                    return Some(Err(StreamError::Io {
                        line: line_no,
                        source,
                    }));
                }
            };
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            let parsed = match parse_line(line_no, text) {
                Ok(p) => p,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            let (frame, t, detection) = match parsed {
                Parsed::Header(h) => {
                    if self.header.is_none() && self.last_frame.is_none() {
                        self.header = Some(h);
                        continue;
                    }
                    self.done = true;
                    return Some(Err(StreamError::Syntax {
                        line: line_no,
                        message: "header record must be the first record".into(),
                    }));
                }
                Parsed::Record {
                    frame,
                    t,
                    detection,
                } => (frame, t, detection),
            };

            if let Some((cur, explicit_t, _)) = self.current.as_mut() {
                if cur.frame_index == frame {
                    if let Some(t) = t {
                        if *explicit_t && t != cur.timestamp {
                            self.done = true;
                            return Some(Err(StreamError::Syntax {
                                line: line_no,
                                message: format!(
                                    "timestamp {t} disagrees with {} for frame {frame}",
                                    cur.timestamp
                                ),
                            }));
                        }
                    }
                    cur.detections.extend(detection);
                    continue;
                }
            }
            if let Some(prev) = self.last_frame {
                if frame <= prev {
                    self.done = true;
                    return Some(Err(StreamError::FrameRegression {
                        line: line_no,
                        frame,
                        previous: prev,
                    }));
                }
            }
            self.last_frame = Some(frame);
            let timestamp = t.unwrap_or(frame as f64 / self.fps);
            let started = (
                FrameDetections {
                    frame_index: frame,
                    timestamp,
                    detections: detection.into_iter().collect(),
                },
                t.is_some(),
                line_no,
            );
            if let Some(finished) = self.current.replace(started) {
                return Some(self.emit(finished));
            }
        }
    }
}

/// Parses a whole in-memory stream.
pub fn parse_detection_stream(text: &str, fps: f64) -> Result<Vec<FrameDetections>, StreamError> {
    DetectionReader::new(text.as_bytes(), fps).collect()
}

/// Writes frames in the wire format, one detection per line, empty frames as
/// `class: null` records. An optional header record goes first.
pub fn write_detection_stream<W: Write>(
    mut out: W,
    header: Option<&Value>,
    frames: &[FrameDetections],
) -> std::io::Result<()> {
    if let Some(h) = header {
        serde_json::to_writer(&mut out, &serde_json::json!({ "header": h }))?;
        out.write_all(b"\n")?;
    }
    for frame in frames {
        if frame.detections.is_empty() {
            let rec = WireOut {
                frame: frame.frame_index,
                t: frame.timestamp,
                class: None,
                x: None,
                y: None,
                w: None,
                h: None,
                conf: None,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
            continue;
        }
        for d in &frame.detections {
            let rec = WireOut {
                frame: frame.frame_index,
                t: frame.timestamp,
                class: Some(d.class.as_str()),
                x: Some(d.bbox.x),
                y: Some(d.bbox.y),
                w: Some(d.bbox.w),
                h: Some(d.bbox.h),
                conf: Some(d.confidence),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
