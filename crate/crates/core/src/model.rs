//! Synthetic video ground truth and question instances.
//!
//! Bounding boxes are normalized to the unit square; there are no pixels.
//! Tools answer from these records directly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type FrameIndex = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid generation profile: {0}")]
    InvalidProfile(String),
    #[error("video {video_id} violates invariant: {reason}")]
    InvalidVideo { video_id: String, reason: String },
    #[error("no ground truth compatible with {kind:?} in video {video_id}")]
    Unsatisfiable { kind: QuestionKind, video_id: String },
}

/// Axis-aligned box `(x0, y0, x1, y1)` in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BBox {
    pub const UNIT: BBox = BBox { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    /// Strictly positive extent and inside the unit square.
    pub fn is_well_formed(&self) -> bool {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        coords.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c))
            && self.x0 < self.x1
            && self.y0 < self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        };
        (b.x0 < b.x1 && b.y0 < b.y1).then_some(b)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.intersection(other).is_some()
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |b| b.area());
        let u = self.area() + other.area() - inter;
        if u <= 0.0 {
            0.0
        } else {
            inter / u
        }
    }
}

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[FrameIndex; 2]", into = "[FrameIndex; 2]")]
pub struct Span {
    pub start: FrameIndex,
    pub end: FrameIndex,
}

impl From<[FrameIndex; 2]> for Span {
    fn from(v: [FrameIndex; 2]) -> Self {
        Span { start: v[0], end: v[1] }
    }
}

impl From<Span> for [FrameIndex; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl Span {
    pub fn new(start: FrameIndex, end: FrameIndex) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, f: FrameIndex) -> bool {
        self.start <= f && f <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn frames(&self) -> impl Iterator<Item = FrameIndex> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectGT {
    pub label: String,
    /// Persistent across frames; re-appearances keep the same id.
    pub instance_id: u32,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGT {
    pub content: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGT {
    pub label: String,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: FrameIndex,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<ObjectGT>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub texts: Vec<TextGT>,
}

impl FrameRecord {
    pub fn empty(index: FrameIndex) -> Self {
        FrameRecord { index, objects: Vec::new(), texts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVideo {
    pub video_id: String,
    pub duration_s: f64,
    pub fps: f64,
    pub frames: Vec<FrameRecord>,
    pub events: Vec<EventGT>,
}

/// `floor(duration_s * fps)`, the frame count implied by a duration.
pub fn frame_count_for(duration_s: f64, fps: f64) -> usize {
    if duration_s <= 0.0 || fps <= 0.0 || !duration_s.is_finite() || !fps.is_finite() {
        return 0;
    }
    // Guard against 119.99999 style products.
    (duration_s * fps + 1e-9).floor() as usize
}

impl SyntheticVideo {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn last_frame(&self) -> Option<FrameIndex> {
        self.frames.len().checked_sub(1)
    }

    pub fn frame(&self, index: FrameIndex) -> Option<&FrameRecord> {
        self.frames.get(index)
    }

    pub fn full_span(&self) -> Option<Span> {
        self.last_frame().map(|l| Span::new(0, l))
    }

    pub fn events_overlapping<'a>(&'a self, span: &'a Span) -> impl Iterator<Item = &'a EventGT> {
        self.events.iter().filter(move |e| e.span.overlaps(span))
    }

    pub fn events_at(&self, frame: FrameIndex) -> impl Iterator<Item = &EventGT> {
        self.events.iter().filter(move |e| e.span.contains(frame))
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| ModelError::InvalidVideo {
            video_id: self.video_id.clone(),
            reason,
        };
        if !(self.fps > 0.0) {
            return Err(fail(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.duration_s >= 0.0) {
            return Err(fail(format!("negative duration {}", self.duration_s)));
        }
        let n = frame_count_for(self.duration_s, self.fps);
        if n != self.frames.len() {
            return Err(fail(format!("expected {n} frames, found {}", self.frames.len())));
        }
        let mut labels = std::collections::BTreeMap::new();
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i {
                return Err(fail(format!("frame at position {i} has index {}", f.index)));
            }
            for o in &f.objects {
                if !o.bbox.is_well_formed() {
                    return Err(fail(format!("object bbox {:?} on frame {i}", o.bbox)));
                }
                if let Some(prev) = labels.insert(o.instance_id, o.label.as_str()) {
                    if prev != o.label {
                        return Err(fail(format!(
                            "instance {} labelled both {prev} and {}",
                            o.instance_id, o.label
                        )));
                    }
                }
            }
            for t in &f.texts {
                if t.content.trim().is_empty() {
                    return Err(fail(format!("empty text on frame {i}")));
                }
                if !t.bbox.is_well_formed() {
                    return Err(fail(format!("text bbox {:?} on frame {i}", t.bbox)));
                }
            }
        }
        for e in &self.events {
            if e.span.start > e.span.end || e.span.end >= n {
                return Err(fail(format!("event '{}' span {:?} out of bounds", e.label, e.span)));
            }
            if let Some(r) = e.region {
                if !r.is_well_formed() {
                    return Err(fail(format!("event '{}' region malformed", e.label)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    LocateText,
    CountObjects,
    EventOrder,
    AttributeInEvent,
    GlobalTheme,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 5] = [
        QuestionKind::LocateText,
        QuestionKind::CountObjects,
        QuestionKind::EventOrder,
        QuestionKind::AttributeInEvent,
        QuestionKind::GlobalTheme,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuestionKind::LocateText => "locate_text",
            QuestionKind::CountObjects => "count_objects",
            QuestionKind::EventOrder => "event_order",
            QuestionKind::AttributeInEvent => "attribute_in_event",
            QuestionKind::GlobalTheme => "global_theme",
        }
    }
}

/// The question-relevant region in time and space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi3D {
    pub span: Span,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub question_id: String,
    pub video_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub roi: Roi3D,
    pub question_kind: QuestionKind,
}

impl QAInstance {
    pub fn correct_option(&self) -> &str {
        &self.options[self.correct_index]
    }

    pub fn validate(&self, video: &SyntheticVideo) -> Result<(), ModelError> {
        let fail = |reason: String| ModelError::InvalidVideo {
            video_id: video.video_id.clone(),
            reason: format!("question {}: {reason}", self.question_id),
        };
        if self.video_id != video.video_id {
            return Err(fail(format!("references video {}", self.video_id)));
        }
        if self.options.len() < 2 {
            return Err(fail("fewer than two options".into()));
        }
        if self.correct_index >= self.options.len() {
            return Err(fail(format!("correct_index {} out of range", self.correct_index)));
        }
        let n = video.frame_count();
        if self.roi.span.start > self.roi.span.end || self.roi.span.end >= n {
            return Err(fail(format!("roi span {:?} outside video", self.roi.span)));
        }
        if !self.roi.bbox.is_well_formed() {
            return Err(fail("roi bbox malformed".into()));
        }
        Ok(())
    }
}
