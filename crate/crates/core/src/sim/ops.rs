//! Ground-truth operations behind the simulated tools.
//!
//! Each function is pure given its inputs and the random stream it is handed.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::frames::{densify_keys, AnnotationKind, FrameSelection, Payload, TemporalUpdate, UpdateMode, VisibleFrameDictionary, INITIAL_SAMPLE_FRAMES};
use crate::generate::roi_evidence;
use crate::model::{BBox, EventGT, FrameIndex, ObjectGT, QAInstance, Span, SyntheticVideo, TextGT};
use crate::rng::StreamRng;
use crate::text::{content_tokens, overlap, plural, raw_tokens, singular};
use crate::tool::ToolError;

use super::NoiseModel;

pub const EMPTY: &str = "–";

/// Canonical object label for a query word.
pub fn normalize_label(label: &str) -> String {
    singular(label.trim().to_lowercase().as_str())
}

fn visible(dict: &VisibleFrameDictionary, frame: FrameIndex) -> Result<(), ToolError> {
    if frame >= dict.frame_count {
        return Err(ToolError::IndexOutOfRange { index: frame as i64, frame_count: dict.frame_count });
    }
    if !dict.contains(frame) {
        return Err(ToolError::FrameNotVisible(frame));
    }
    Ok(())
}

fn in_crop(dict: &VisibleFrameDictionary, frame: FrameIndex, bbox: &BBox) -> bool {
    dict.zoom_crop(frame).is_none_or(|c| c.intersects(bbox))
}

/// Objects on a visible frame after any zoom crop.
pub fn frame_objects<'a>(
    video: &'a SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
) -> Result<Vec<&'a ObjectGT>, ToolError> {
    visible(dict, frame)?;
    Ok(video.frames[frame].objects.iter().filter(|o| in_crop(dict, frame, &o.bbox)).collect())
}

pub fn frame_texts<'a>(
    video: &'a SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
) -> Result<Vec<&'a TextGT>, ToolError> {
    visible(dict, frame)?;
    Ok(video.frames[frame].texts.iter().filter(|t| in_crop(dict, frame, &t.bbox)).collect())
}

pub fn detect_objects(
    video: &SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
    label: &str,
    p_miss: f64,
    rng: &mut StreamRng,
) -> Result<Vec<BBox>, ToolError> {
    let want = normalize_label(label);
    let mut out = Vec::new();
    for o in frame_objects(video, dict, frame)? {
        if o.label == want && !rng.random_bool(p_miss) {
            out.push(o.bbox);
        }
    }
    Ok(out)
}

pub fn detect_text(
    video: &SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
    p_miss: f64,
    rng: &mut StreamRng,
) -> Result<Vec<(String, BBox)>, ToolError> {
    let mut out = Vec::new();
    for t in frame_texts(video, dict, frame)? {
        if !rng.random_bool(p_miss) {
            out.push((t.content.clone(), t.bbox));
        }
    }
    Ok(out)
}

/// Segmentation regions; masks are reported by their bounding boxes.
pub fn segment(
    video: &SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
    label: Option<&str>,
    p_miss: f64,
    rng: &mut StreamRng,
) -> Result<Vec<(String, BBox)>, ToolError> {
    let want = label.map(normalize_label);
    let mut out = Vec::new();
    for o in frame_objects(video, dict, frame)? {
        if want.as_ref().is_none_or(|w| *w == o.label) && !rng.random_bool(p_miss) {
            out.push((o.label.clone(), o.bbox));
        }
    }
    Ok(out)
}

/// Event whose label shares the most content tokens with `text`; ties go to
/// the earliest event.
pub fn best_event<'a>(video: &'a SyntheticVideo, text: &str) -> Option<&'a EventGT> {
    let q = content_tokens(text);
    let mut best: Option<(&EventGT, usize)> = None;
    for e in &video.events {
        let s = overlap(&q, &content_tokens(&e.label));
        if s > 0 && best.is_none_or(|(_, b)| s > b) {
            best = Some((e, s));
        }
    }
    best.map(|(e, _)| e)
}

fn jitter(v: FrameIndex, j: u32, last: FrameIndex, rng: &mut StreamRng) -> FrameIndex {
    if j == 0 {
        return v;
    }
    let d = rng.random_range(-(j as i64)..=j as i64);
    (v as i64 + d).clamp(0, last as i64) as FrameIndex
}

pub fn ground_event<'a>(
    video: &'a SyntheticVideo,
    description: &str,
    jitter_frames: u32,
    rng: &mut StreamRng,
) -> Result<(Span, &'a EventGT), ToolError> {
    if description.trim().is_empty() {
        return Err(ToolError::InvalidArgs {
            tool: "temporal_grounding".into(),
            reason: "description is empty".into(),
        });
    }
    let e = best_event(video, description).ok_or_else(|| ToolError::EventNotFound(description.to_string()))?;
    let last = video.last_frame().unwrap_or(0);
    let a = jitter(e.span.start, jitter_frames, last, rng);
    let b = jitter(e.span.end, jitter_frames, last, rng);
    Ok((Span::new(a.min(b), a.max(b)), e))
}

/// Validates a signed span against the video bounds.
pub fn check_span(video: &SyntheticVideo, tool: &str, start: i64, end: i64) -> Result<Span, ToolError> {
    let n = video.frame_count();
    for v in [start, end] {
        if v < 0 || v as usize >= n {
            return Err(ToolError::IndexOutOfRange { index: v, frame_count: n });
        }
    }
    if start > end {
        return Err(ToolError::InvalidArgs { tool: tool.into(), reason: format!("span start {start} after end {end}") });
    }
    Ok(Span::new(start as usize, end as usize))
}

pub fn refer_interval(video: &SyntheticVideo, span: Span) -> String {
    let labels: Vec<&str> = video.events_overlapping(&span).map(|e| e.label.as_str()).collect();
    if labels.is_empty() {
        "no salient events".to_string()
    } else {
        format!("events: {}", labels.join(", "))
    }
}

/// Keys inside `span` plus up to 16 uniform keys in it; everything else goes.
pub fn trim_video(dict: &VisibleFrameDictionary, span: Span) -> (TemporalUpdate, Vec<FrameIndex>) {
    let mut keys: BTreeSet<FrameIndex> = dict.keys().filter(|k| span.contains(*k)).collect();
    let mut added = Vec::new();
    for k in densify_keys(span, INITIAL_SAMPLE_FRAMES) {
        if keys.insert(k) && !dict.contains(k) {
            added.push(k);
        }
    }
    (TemporalUpdate { selection: FrameSelection::Set { frames: keys }, mode: UpdateMode::Retain }, added)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorVariant {
    Vanilla,
    AKeys,
    Grid,
}

impl SelectorVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vanilla" => Some(SelectorVariant::Vanilla),
            "akeys" => Some(SelectorVariant::AKeys),
            "grid" => Some(SelectorVariant::Grid),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorVariant::Vanilla => "vanilla",
            SelectorVariant::AKeys => "akeys",
            SelectorVariant::Grid => "grid",
        }
    }
}

fn annotation_text(dict: &VisibleFrameDictionary, frame: FrameIndex) -> String {
    dict.get(frame)
        .map(|i| i.annotations.iter().map(|a| a.payload.to_string()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default()
}

fn textual_signature(dict: &VisibleFrameDictionary, frame: FrameIndex) -> String {
    dict.get(frame)
        .map(|i| {
            i.annotations
                .iter()
                .filter(|a| a.kind.is_textual())
                .map(|a| a.payload.to_string())
                .collect::<Vec<_>>()
                .join(" | ")
        })
        .unwrap_or_default()
}

/// Visible frames a selector keeps, and whether it fell back to keeping all.
pub fn select_frames(
    variant: SelectorVariant,
    video: &SyntheticVideo,
    dict: &VisibleFrameDictionary,
    question: &str,
) -> (BTreeSet<FrameIndex>, bool) {
    let q = content_tokens(question);
    let mut sel: BTreeSet<FrameIndex> = match variant {
        SelectorVariant::Vanilla | SelectorVariant::AKeys => dict
            .keys()
            .filter(|&k| overlap(&q, &content_tokens(&annotation_text(dict, k))) > 0)
            .collect(),
        // The grid reader looks at the frames themselves.
        SelectorVariant::Grid => dict
            .keys()
            .filter(|&k| overlap(&q, &content_tokens(&caption_frame(video, dict, k).unwrap_or_default())) > 0)
            .collect(),
    };
    if variant == SelectorVariant::AKeys {
        let keys: Vec<FrameIndex> = dict.keys().collect();
        for w in keys.windows(2) {
            if textual_signature(dict, w[0]) != textual_signature(dict, w[1]) {
                sel.insert(w[0]);
                sel.insert(w[1]);
            }
        }
    }
    if sel.is_empty() {
        (dict.key_set(), true)
    } else {
        (sel, false)
    }
}

/// Visible frames inside the span of the event best matching `action`.
pub fn localize_action(video: &SyntheticVideo, dict: &VisibleFrameDictionary, action: &str) -> Vec<FrameIndex> {
    match best_event(video, action) {
        Some(e) => dict.keys().filter(|k| e.span.contains(*k)).collect(),
        None => Vec::new(),
    }
}

fn list_or_empty(items: Vec<String>) -> String {
    if items.is_empty() {
        EMPTY.to_string()
    } else {
        items.join(", ")
    }
}

pub fn caption_frame(video: &SyntheticVideo, dict: &VisibleFrameDictionary, frame: FrameIndex) -> Result<String, ToolError> {
    let mut labels: Vec<String> = Vec::new();
    for o in frame_objects(video, dict, frame)? {
        if !labels.contains(&o.label) {
            labels.push(o.label.clone());
        }
    }
    let mut texts: Vec<String> = Vec::new();
    for t in frame_texts(video, dict, frame)? {
        if !texts.contains(&t.content) {
            texts.push(t.content.clone());
        }
    }
    let events: Vec<String> = video.events_at(frame).map(|e| e.label.clone()).collect();
    Ok(format!(
        "objects: {}; text: {}; events: {}",
        list_or_empty(labels),
        list_or_empty(texts),
        list_or_empty(events)
    ))
}

const UNKNOWN: &str = "unknown";

/// Object label named in a question, preferring labels present on the frame.
fn question_label(question: &str, objects: &[&ObjectGT]) -> Option<String> {
    let words: Vec<String> = raw_tokens(question).iter().map(|w| singular(w)).collect();
    objects
        .iter()
        .map(|o| o.label.clone())
        .find(|l| words.contains(l))
        .or_else(|| {
            crate::generate::OBJECT_LABELS
                .iter()
                .find(|l| words.iter().any(|w| w == *l))
                .map(|l| l.to_string())
        })
}

fn marked_box(dict: &VisibleFrameDictionary, frame: FrameIndex, mark: u64) -> Option<BBox> {
    let info = dict.get(frame)?;
    info.annotations.iter().rev().find_map(|a| match (&a.kind, &a.payload) {
        (AnnotationKind::Marker, Payload::Record(v)) => v.get("marks")?.as_array()?.iter().find_map(|m| {
            (m.get("mark")?.as_u64()? == mark).then(|| serde_json::from_value(m.get("bbox")?.clone()).ok())?
        }),
        _ => None,
    })
}

/// Rule-table answer over one frame's ground truth.
pub fn answer_image_question(
    video: &SyntheticVideo,
    dict: &VisibleFrameDictionary,
    frame: FrameIndex,
    question: &str,
) -> Result<String, ToolError> {
    let objects = frame_objects(video, dict, frame)?;
    let texts = frame_texts(video, dict, frame)?;
    let words = raw_tokens(question);
    let has = |w: &str| words.iter().any(|t| t == w);

    if let Some(pos) = words.iter().position(|w| w == "mark") {
        if let Some(n) = words.get(pos + 1).and_then(|w| w.parse::<u64>().ok()) {
            let Some(b) = marked_box(dict, frame, n) else { return Ok(UNKNOWN.into()) };
            let labels: Vec<String> = objects.iter().filter(|o| o.bbox.intersects(&b)).map(|o| o.label.clone()).collect();
            return Ok(if labels.is_empty() { UNKNOWN.into() } else { labels.join(", ") });
        }
    }
    if has("color") || has("colour") {
        let Some(label) = question_label(question, &objects) else { return Ok(UNKNOWN.into()) };
        let mut colors: Vec<String> = Vec::new();
        for o in objects.iter().filter(|o| o.label == label) {
            if let Some(c) = &o.color {
                if !colors.contains(c) {
                    colors.push(c.clone());
                }
            }
        }
        return Ok(if colors.is_empty() { UNKNOWN.into() } else { colors.join(", ") });
    }
    if has("how") && has("many") {
        let Some(label) = question_label(question, &objects) else { return Ok(UNKNOWN.into()) };
        return Ok(objects.iter().filter(|o| o.label == label).count().to_string());
    }
    if ["sign", "say", "says", "read", "text", "written"].iter().any(|w| has(w)) {
        let mut contents: Vec<String> = Vec::new();
        for t in &texts {
            if !contents.contains(&t.content) {
                contents.push(t.content.clone());
            }
        }
        return Ok(if contents.is_empty() { UNKNOWN.into() } else { contents.join(", ") });
    }
    Ok(UNKNOWN.into())
}

/// Crop rectangle clamped to the unit square.
pub fn zoom_patch(dict: &VisibleFrameDictionary, frame: FrameIndex, bbox: BBox) -> Result<BBox, ToolError> {
    visible(dict, frame)?;
    let bad = ToolError::InvalidRegion([bbox.x0, bbox.y0, bbox.x1, bbox.y1]);
    match bbox.intersection(&BBox::UNIT) {
        Some(c) if c.area() > 0.0 => Ok(c),
        _ => Err(bad),
    }
}

/// Numbered marks for distinct boxes, in first-seen order.
pub fn mark_bboxes(bboxes: &[BBox]) -> Result<Vec<(u32, BBox)>, ToolError> {
    let mut out: Vec<(u32, BBox)> = Vec::new();
    for b in bboxes {
        if !b.is_well_formed() {
            return Err(ToolError::InvalidRegion([b.x0, b.y0, b.x1, b.y1]));
        }
        if !out.iter().any(|(_, o)| o == b) {
            out.push((out.len() as u32 + 1, *b));
        }
    }
    Ok(out)
}

pub fn grid_layout(k: usize) -> (usize, usize) {
    if k == 0 {
        return (0, 0);
    }
    let mut rows = (k as f64).sqrt().ceil() as usize;
    // Guard against float error around perfect squares.
    while rows * rows < k {
        rows += 1;
    }
    while rows > 1 && (rows - 1) * (rows - 1) >= k {
        rows -= 1;
    }
    (rows, k.div_ceil(rows))
}

/// Distinct instances of `label` in `span`; an instance counts when at least
/// one of its sightings survives the miss rate.
pub fn track_objects(video: &SyntheticVideo, span: Span, label: &str, p_miss: f64, rng: &mut StreamRng) -> usize {
    let want = normalize_label(label);
    let mut ids: BTreeSet<u32> = BTreeSet::new();
    for f in span.frames().filter(|&f| f < video.frame_count()) {
        for o in video.frames[f].objects.iter().filter(|o| o.label == want) {
            if !rng.random_bool(p_miss) {
                ids.insert(o.instance_id);
            }
        }
    }
    ids.len()
}

/// Whether the dictionary holds evidence for the question's region of
/// interest: a visible key in the roi span and a textual annotation on such
/// a key that mentions roi content.
pub fn covers_roi(video: &SyntheticVideo, qa: &QAInstance, dict: &VisibleFrameDictionary) -> bool {
    let span = qa.roi.span;
    let in_span: Vec<FrameIndex> = dict.keys().filter(|k| span.contains(*k)).collect();
    if in_span.is_empty() {
        return false;
    }
    let stems = |set: BTreeSet<String>| -> BTreeSet<String> { set.iter().map(|t| singular(t)).collect() };
    let evidence = stems(roi_evidence(video, qa));
    in_span.iter().any(|&k| {
        dict.get(k).is_some_and(|info| {
            info.annotations
                .iter()
                .filter(|a| a.kind.is_textual())
                .any(|a| overlap(&stems(content_tokens(&a.payload.to_string())), &evidence) > 0)
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneralVariant {
    TextSummarizer,
    VideoSummarizer,
    VideoQa,
}

impl GeneralVariant {
    pub fn from_tool(name: &str) -> Option<Self> {
        match name {
            "text_summarizer" => Some(GeneralVariant::TextSummarizer),
            "video_summarizer" => Some(GeneralVariant::VideoSummarizer),
            "video_qa" => Some(GeneralVariant::VideoQa),
            _ => None,
        }
    }
}

/// Index of the option a general tool answers with, and whether the
/// dictionary covered the roi.
pub fn general_answer(
    variant: GeneralVariant,
    qa: &QAInstance,
    dict: &VisibleFrameDictionary,
    video: &SyntheticVideo,
    noise: &NoiseModel,
    rng: &mut StreamRng,
) -> (usize, bool) {
    let covered = variant == GeneralVariant::TextSummarizer && covers_roi(video, qa, dict);
    let p = if covered { noise.p_roi_correct } else { noise.p_general_correct };
    let u: f64 = rng.random();
    if u < p || qa.options.len() < 2 {
        return (qa.correct_index, covered);
    }
    let wrong: Vec<usize> = (0..qa.options.len()).filter(|&i| i != qa.correct_index).collect();
    (*wrong.choose(rng).expect("at least one wrong option"), covered)
}

/// Question tokens naming an object label present anywhere in the video.
pub fn identify_objects(video: &SyntheticVideo, question: &str) -> Vec<String> {
    let present: BTreeSet<&str> = video.frames.iter().flat_map(|f| f.objects.iter().map(|o| o.label.as_str())).collect();
    let mut out: Vec<String> = Vec::new();
    for w in raw_tokens(question) {
        let s = singular(&w);
        if present.contains(s.as_str()) && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

pub fn recognize_actions(video: &SyntheticVideo, span: Span) -> Vec<String> {
    video.events_overlapping(&span).map(|e| e.label.clone()).collect()
}

/// Human-readable count observation, e.g. "3 people".
pub fn count_phrase(n: usize, label: &str) -> String {
    if n == 1 {
        format!("1 {label}")
    } else {
        format!("{n} {}", plural(label))
    }
}

const SEARCH_SNIPPETS: &[&str] = &[
    "No authoritative result found.",
    "Encyclopedia entry: general background on the topic.",
    "News article: recent coverage mentioning the query.",
    "Forum thread: anecdotal discussion, low confidence.",
];

const CODE_SNIPPETS: &[&str] = &[
    "def solve(frames):\n    return len(frames)",
    "def solve(boxes):\n    return sorted(boxes)",
    "def solve(spans):\n    return max(spans, key=lambda s: s[1] - s[0])",
];

/// Fixed payload keyed by a digest of the arguments.
pub fn canned(tool: &str, args: &serde_json::Value) -> Result<serde_json::Value, ToolError> {
    let key = crate::rng::digest(args);
    let idx = u64::from_str_radix(&key[..8], 16).unwrap_or(0) as usize;
    match tool {
        "google_search" => Ok(serde_json::json!({
            "result": {"snippet": SEARCH_SNIPPETS[idx % SEARCH_SNIPPETS.len()], "key": key}
        })),
        "python_code_generator" => Ok(serde_json::json!({
            "result": {"code": CODE_SNIPPETS[idx % CODE_SNIPPETS.len()], "key": key}
        })),
        other => Err(ToolError::ToolNotFound(other.to_string())),
    }
}

pub fn full_span(video: &SyntheticVideo) -> Span {
    video.full_span().unwrap_or(Span::new(0, 0))
}
