//! The Visible Frame Dictionary: visible frame indices mapped to the
//! annotations tools have gathered for them.
//!
//! Temporal tools edit the key set; spatial tools append annotations. Every
//! mutation lands in `history`, and removed frames are archived there with
//! their annotations, so [`VisibleFrameDictionary::replay`] can rebuild the
//! live state from the log alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrameIndex, Span, SyntheticVideo};

pub const DEFAULT_CONTEXT_BUDGET: usize = 8000;
pub const INITIAL_SAMPLE_FRAMES: usize = 16;
pub const TRUNCATION_MARKER: &str = "[context truncated]";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DictError {
    #[error("video has no frames")]
    EmptyVideo,
    #[error("frame index {index} out of range for {frame_count} frames")]
    IndexOutOfRange { index: FrameIndex, frame_count: usize },
    #[error("invalid segment {start}..{end}")]
    InvalidSegment { start: FrameIndex, end: FrameIndex },
    #[error("update would leave no visible frames")]
    WouldEmptyDictionary,
    #[error("frame {0} is not visible")]
    FrameNotVisible(FrameIndex),
    #[error("annotation step {step} precedes step {last} already recorded on frame {frame}")]
    StepOutOfOrder { frame: FrameIndex, step: u32, last: u32 },
    #[error("history does not start with an init record")]
    MissingInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Caption,
    QaAnswer,
    Detection,
    Ocr,
    Marker,
    ZoomRef,
    Custom,
}

impl AnnotationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnnotationKind::Caption => "caption",
            AnnotationKind::QaAnswer => "qa_answer",
            AnnotationKind::Detection => "detection",
            AnnotationKind::Ocr => "ocr",
            AnnotationKind::Marker => "marker",
            AnnotationKind::ZoomRef => "zoom_ref",
            AnnotationKind::Custom => "custom",
        }
    }

    /// Kinds whose payload is free text a reader would quote.
    pub fn is_textual(&self) -> bool {
        matches!(
            self,
            AnnotationKind::Caption | AnnotationKind::QaAnswer | AnnotationKind::Ocr | AnnotationKind::Custom
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Text(String),
    Record(serde_json::Value),
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Text(s) => f.write_str(s),
            Payload::Record(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub source_tool: String,
    pub kind: AnnotationKind,
    pub payload: Payload,
    pub step: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub annotations: Vec<Annotation>,
}

/// Which frames a temporal tool points at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FrameSelection {
    Single { frame: FrameIndex },
    Segment { span: Span },
    Set { frames: BTreeSet<FrameIndex> },
}

impl FrameSelection {
    pub fn frames(&self) -> BTreeSet<FrameIndex> {
        match self {
            FrameSelection::Single { frame } => BTreeSet::from([*frame]),
            FrameSelection::Segment { span } => span.frames().collect(),
            FrameSelection::Set { frames } => frames.clone(),
        }
    }

    pub fn set(frames: impl IntoIterator<Item = FrameIndex>) -> Self {
        FrameSelection::Set { frames: frames.into_iter().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Make the selected frames visible.
    Add,
    /// Hide the selected frames.
    Remove,
    /// Keep exactly the selected frames visible.
    Retain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalUpdate {
    pub selection: FrameSelection,
    pub mode: UpdateMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Init {
        keys: Vec<FrameIndex>,
    },
    Temporal {
        step: u32,
        tool: String,
        added: Vec<FrameIndex>,
        /// Removed frames with the annotations they held.
        removed: Vec<(FrameIndex, FrameInfo)>,
        focus: Vec<FrameIndex>,
    },
    Annotate {
        step: u32,
        tool: String,
        frame: FrameIndex,
        annotation: Annotation,
    },
}

/// What one temporal update changed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyDelta {
    pub added: Vec<FrameIndex>,
    pub removed: Vec<FrameIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleFrameDictionary {
    pub video_ref: String,
    pub frame_count: usize,
    entries: BTreeMap<FrameIndex, FrameInfo>,
    /// Frames singled out by the latest temporal update; spatial tools
    /// default to these.
    focus: BTreeSet<FrameIndex>,
    history: Vec<Mutation>,
}

/// Keys of the initial uniform sample for a video of `frame_count` frames
/// lasting `duration_s` at `fps`.
pub fn uniform_sample_keys(frame_count: usize, duration_s: f64, fps: f64) -> Vec<FrameIndex> {
    if frame_count == 0 {
        return Vec::new();
    }
    let last = frame_count - 1;
    let keys: BTreeSet<FrameIndex> = if duration_s > INITIAL_SAMPLE_FRAMES as f64 {
        let denom = (INITIAL_SAMPLE_FRAMES - 1) as f64;
        (0..INITIAL_SAMPLE_FRAMES)
            .map(|k| ((k as f64 * last as f64) / denom).round() as FrameIndex)
            .collect()
    } else {
        // One frame per second.
        let secs = duration_s.ceil().max(1.0) as usize;
        (0..secs)
            .map(|s| ((s as f64) * fps).round() as FrameIndex)
            .filter(|&i| i <= last)
            .collect()
    };
    keys.into_iter().collect()
}

/// Up to `n` evenly spread keys strictly inside each of `n` equal cells of
/// `span` (cell midpoints), so a densified span gains frames between an
/// existing uniform sample.
pub fn densify_keys(span: Span, n: usize) -> Vec<FrameIndex> {
    if n == 0 || span.is_empty() {
        return Vec::new();
    }
    let len = span.len() as f64;
    let keys: BTreeSet<FrameIndex> = (0..n)
        .map(|k| span.start + (((k as f64 + 0.5) * len / n as f64).floor() as FrameIndex).min(span.len() - 1))
        .collect();
    keys.into_iter().collect()
}

impl VisibleFrameDictionary {
    /// Initial state: a sparse uniform sample with empty info.
    pub fn init_uniform_sample(video: &SyntheticVideo) -> Result<Self, DictError> {
        let n = video.frame_count();
        if n == 0 {
            return Err(DictError::EmptyVideo);
        }
        let keys = uniform_sample_keys(n, video.duration_s, video.fps);
        Ok(Self::with_keys(&video.video_id, n, keys))
    }

    pub fn with_keys(video_ref: &str, frame_count: usize, keys: Vec<FrameIndex>) -> Self {
        let entries = keys.iter().map(|&k| (k, FrameInfo::default())).collect();
        VisibleFrameDictionary {
            video_ref: video_ref.to_string(),
            frame_count,
            entries,
            focus: BTreeSet::new(),
            history: vec![Mutation::Init { keys }],
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = FrameIndex> + '_ {
        self.entries.keys().copied()
    }

    pub fn key_set(&self) -> BTreeSet<FrameIndex> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, frame: FrameIndex) -> bool {
        self.entries.contains_key(&frame)
    }

    pub fn get(&self, frame: FrameIndex) -> Option<&FrameInfo> {
        self.entries.get(&frame)
    }

    pub fn entries(&self) -> &BTreeMap<FrameIndex, FrameInfo> {
        &self.entries
    }

    pub fn history(&self) -> &[Mutation] {
        &self.history
    }

    /// Latest temporal focus restricted to visible frames, or every visible
    /// frame when no temporal tool has narrowed the view yet.
    pub fn focus_frames(&self) -> Vec<FrameIndex> {
        let f: Vec<FrameIndex> = self.focus.iter().copied().filter(|k| self.contains(*k)).collect();
        if f.is_empty() {
            self.keys().collect()
        } else {
            f
        }
    }

    pub fn has_focus(&self) -> bool {
        self.focus.iter().any(|k| self.contains(*k))
    }

    pub fn annotation_count(&self) -> usize {
        self.entries.values().map(|i| i.annotations.len()).sum()
    }

    /// Frames already annotated by `tool`.
    pub fn frames_annotated_by(&self, tool: &str) -> BTreeSet<FrameIndex> {
        self.entries
            .iter()
            .filter(|(_, i)| i.annotations.iter().any(|a| a.source_tool == tool))
            .map(|(k, _)| *k)
            .collect()
    }

    fn check_bounds(&self, sel: &FrameSelection) -> Result<(), DictError> {
        if let FrameSelection::Segment { span } = sel {
            if span.start > span.end {
                return Err(DictError::InvalidSegment { start: span.start, end: span.end });
            }
        }
        let max = match sel {
            FrameSelection::Single { frame } => Some(*frame),
            FrameSelection::Segment { span } => Some(span.end),
            FrameSelection::Set { frames } => frames.iter().next_back().copied(),
        };
        match max {
            Some(index) if index >= self.frame_count => {
                Err(DictError::IndexOutOfRange { index, frame_count: self.frame_count })
            }
            _ => Ok(()),
        }
    }

    /// Adds or removes visible keys. The dictionary is unchanged on error.
    pub fn apply_temporal_update(
        &mut self,
        update: &TemporalUpdate,
        step: u32,
        tool: &str,
    ) -> Result<KeyDelta, DictError> {
        self.check_bounds(&update.selection)?;
        let sel = update.selection.frames();
        let current = self.key_set();
        let next: BTreeSet<FrameIndex> = match update.mode {
            UpdateMode::Add => current.union(&sel).copied().collect(),
            UpdateMode::Remove => current.difference(&sel).copied().collect(),
            UpdateMode::Retain => sel.clone(),
        };
        if next.is_empty() {
            return Err(DictError::WouldEmptyDictionary);
        }
        let added: Vec<FrameIndex> = next.difference(&current).copied().collect();
        let removed_keys: Vec<FrameIndex> = current.difference(&next).copied().collect();
        let focus: Vec<FrameIndex> = match update.mode {
            UpdateMode::Add | UpdateMode::Retain => sel.iter().copied().filter(|k| next.contains(k)).collect(),
            UpdateMode::Remove => self.focus.iter().copied().filter(|k| next.contains(k)).collect(),
        };
        let delta = KeyDelta { added: added.clone(), removed: removed_keys.clone() };
        let removed = self.commit_temporal(&added, &removed_keys, &focus);
        self.history.push(Mutation::Temporal {
            step,
            tool: tool.to_string(),
            added,
            removed,
            focus,
        });
        Ok(delta)
    }

    fn commit_temporal(
        &mut self,
        added: &[FrameIndex],
        removed: &[FrameIndex],
        focus: &[FrameIndex],
    ) -> Vec<(FrameIndex, FrameInfo)> {
        let archived = removed
            .iter()
            .map(|k| (*k, self.entries.remove(k).unwrap_or_default()))
            .collect();
        for &k in added {
            self.entries.insert(k, FrameInfo::default());
        }
        self.focus = focus.iter().copied().collect();
        archived
    }

    pub fn annotate(&mut self, frame: FrameIndex, annotation: Annotation) -> Result<(), DictError> {
        let info = self.entries.get_mut(&frame).ok_or(DictError::FrameNotVisible(frame))?;
        if let Some(last) = info.annotations.last() {
            if annotation.step < last.step {
                return Err(DictError::StepOutOfOrder { frame, step: annotation.step, last: last.step });
            }
        }
        info.annotations.push(annotation.clone());
        self.history.push(Mutation::Annotate {
            step: annotation.step,
            tool: annotation.source_tool.clone(),
            frame,
            annotation,
        });
        Ok(())
    }

    /// Rebuilds a dictionary from its mutation log.
    pub fn replay(video_ref: &str, frame_count: usize, history: &[Mutation]) -> Result<Self, DictError> {
        let Some(Mutation::Init { keys }) = history.first() else {
            return Err(DictError::MissingInit);
        };
        let mut d = Self::with_keys(video_ref, frame_count, keys.clone());
        for m in &history[1..] {
            match m {
                Mutation::Init { .. } => return Err(DictError::MissingInit),
                Mutation::Temporal { added, removed, focus, .. } => {
                    let removed_keys: Vec<FrameIndex> = removed.iter().map(|(k, _)| *k).collect();
                    d.commit_temporal(added, &removed_keys, focus);
                    d.history.push(m.clone());
                }
                Mutation::Annotate { frame, annotation, .. } => {
                    d.annotate(*frame, annotation.clone())?;
                }
            }
        }
        Ok(d)
    }

    /// Every annotation that ever existed: live ones plus those archived by
    /// removals, keyed by frame.
    pub fn all_annotations_ever(&self) -> Vec<(FrameIndex, &Annotation)> {
        self.history
            .iter()
            .filter_map(|m| match m {
                Mutation::Annotate { frame, annotation, .. } => Some((*frame, annotation)),
                _ => None,
            })
            .collect()
    }

    pub fn archived_annotations(&self) -> Vec<(FrameIndex, &Annotation)> {
        self.history
            .iter()
            .filter_map(|m| match m {
                Mutation::Temporal { removed, .. } => Some(removed),
                _ => None,
            })
            .flat_map(|r| r.iter().flat_map(|(k, info)| info.annotations.iter().map(move |a| (*k, a))))
            .collect()
    }

    /// Textual snapshot for planners: one line per visible frame in index
    /// order, `frame <i>: <kind>=<payload>; ...`. Oldest annotations are
    /// dropped first when over `budget_chars`, and a marker line says so.
    pub fn render_context(&self, budget_chars: usize) -> String {
        let budget = budget_chars.max(1);
        let lines: Vec<(FrameIndex, Vec<(u32, String)>)> = self
            .entries
            .iter()
            .map(|(k, info)| {
                let parts = info
                    .annotations
                    .iter()
                    .map(|a| (a.step, format!("{}={}", a.kind.as_str(), a.payload)))
                    .collect();
                (*k, parts)
            })
            .collect();
        let render = |lines: &[(FrameIndex, Vec<(u32, String)>)], kept: &BTreeSet<(usize, usize)>| -> String {
            let mut out = String::new();
            for (li, (k, parts)) in lines.iter().enumerate() {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("frame {k}:"));
                let mut first = true;
                for (pi, (_, p)) in parts.iter().enumerate() {
                    if kept.contains(&(li, pi)) {
                        out.push_str(if first { " " } else { "; " });
                        out.push_str(p);
                        first = false;
                    }
                }
            }
            out
        };
        let mut kept: BTreeSet<(usize, usize)> = lines
            .iter()
            .enumerate()
            .flat_map(|(li, (_, parts))| (0..parts.len()).map(move |pi| (li, pi)))
            .collect();
        let full = render(&lines, &kept);
        if full.len() <= budget {
            return full;
        }
        // Drop oldest first: by step, then frame order, then position.
        let mut order: Vec<(u32, usize, usize)> =
            kept.iter().map(|&(li, pi)| (lines[li].1[pi].0, li, pi)).collect();
        order.sort_unstable();
        let mut len = full.len();
        let mut dropped = 0usize;
        let marker_len = |d: usize| format!("\n[truncated {d} annotations]").len();
        for (_, li, pi) in order {
            if len + marker_len(dropped) <= budget {
                break;
            }
            let part_len = lines[li].1[pi].1.len();
            let line_parts = kept.iter().filter(|(l, _)| *l == li).count();
            // "; p" or " p" when only one remains.
            len -= part_len + if line_parts > 1 { 2 } else { 1 };
            kept.remove(&(li, pi));
            dropped += 1;
        }
        if len + marker_len(dropped) > budget {
            return TRUNCATION_MARKER.to_string();
        }
        let mut out = render(&lines, &kept);
        out.push_str(&format!("\n[truncated {dropped} annotations]"));
        out
    }

    /// Latest zoom crop recorded on a frame, if any.
    pub fn zoom_crop(&self, frame: FrameIndex) -> Option<crate::model::BBox> {
        let info = self.entries.get(&frame)?;
        info.annotations.iter().rev().find_map(|a| match (&a.kind, &a.payload) {
            (AnnotationKind::ZoomRef, Payload::Record(v)) => {
                serde_json::from_value::<crate::model::BBox>(v.get("crop")?.clone()).ok()
            }
            _ => None,
        })
    }
}
