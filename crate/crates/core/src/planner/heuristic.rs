//! Keyword-driven planner: question intent picks a tool template, and each
//! step takes the first template entry the scheduler currently allows.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::{Guidance, Observation, PlannerBackend, PlannerContext, PlannerDecision, PlannerError, SelectRequest};
use crate::frames::{AnnotationKind, Payload, VisibleFrameDictionary};
use crate::model::{FrameIndex, Span};
use crate::registry::ToolCategory;
use crate::text::{contains_phrase, content_tokens, overlap, quoted, raw_tokens, singular};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    Text,
    Count,
    Order,
    Attribute,
    Theme,
    Generic,
}

const INTENT_WORDS: &[&str] = &[
    "about", "after", "appear", "appears", "before", "color", "colour", "different", "event", "first", "how",
    "last", "mainly", "many", "near", "next", "read", "say", "says", "sign", "text", "written",
];

fn unquoted(question: &str) -> String {
    match quoted(question) {
        Some(q) => question.replacen(&format!("'{q}'"), " ", 1),
        None => question.to_string(),
    }
}

pub fn classify(question: &str) -> Intent {
    let words = raw_tokens(&unquoted(question));
    let has = |w: &str| words.iter().any(|t| t == w);
    if has("how") && has("many") {
        Intent::Count
    } else if has("color") || has("colour") {
        Intent::Attribute
    } else if ["sign", "text", "read", "written", "say", "says"].iter().any(|w| has(w)) {
        Intent::Text
    } else if ["after", "before", "next"].iter().any(|w| has(w)) {
        Intent::Order
    } else if ["mainly", "about", "theme", "overall", "summarize"].iter().any(|w| has(w)) {
        Intent::Theme
    } else {
        Intent::Generic
    }
}

/// First content word outside the quoted event that is not an intent cue.
pub fn target_label(question: &str) -> Option<String> {
    raw_tokens(&unquoted(question))
        .into_iter()
        .filter(|t| !crate::text::is_stopword(t) && !INTENT_WORDS.contains(&t.as_str()))
        .map(|t| singular(&t))
        .next()
}

/// Answer text reported by the most recent general tool.
pub fn last_general_answer(history: &[Observation]) -> Option<String> {
    history
        .iter()
        .rev()
        .filter(|o| o.category == ToolCategory::General)
        .find_map(|o| o.payload.as_ref()?.get("answer")?.as_str().map(String::from))
}

fn record_label(v: &Value) -> Option<&str> {
    v.get("label")?.as_str()
}

/// Frames where a detector reported `label`.
fn detection_frames(dict: &VisibleFrameDictionary, label: &str) -> BTreeSet<FrameIndex> {
    dict.entries()
        .iter()
        .filter(|(_, info)| {
            info.annotations.iter().any(|a| match (&a.kind, &a.payload) {
                (AnnotationKind::Detection, Payload::Record(v)) => {
                    let boxes = v.get("boxes").and_then(Value::as_array).is_some_and(|b| !b.is_empty());
                    let regions = v
                        .get("regions")
                        .and_then(Value::as_array)
                        .is_some_and(|r| r.iter().any(|x| record_label(x) == Some(label)));
                    (record_label(v) == Some(label) && boxes) || regions
                }
                _ => false,
            })
        })
        .map(|(k, _)| *k)
        .collect()
}

fn ocr_hits(dict: &VisibleFrameDictionary) -> BTreeMap<FrameIndex, String> {
    let mut out = BTreeMap::new();
    for (k, info) in dict.entries() {
        for a in &info.annotations {
            if let (AnnotationKind::Ocr, Payload::Text(t)) = (&a.kind, &a.payload) {
                if !content_tokens(t).is_empty() {
                    out.insert(*k, t.clone());
                }
            }
        }
    }
    out
}

/// Event labels mentioned by captions, most frequent first.
fn caption_events(dict: &VisibleFrameDictionary) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for info in dict.entries().values() {
        for a in info.annotations.iter().filter(|a| a.kind == AnnotationKind::Caption) {
            let text = a.payload.to_string();
            let Some(events) = text.split("events: ").nth(1) else { continue };
            for e in events.split(", ").map(str::trim).filter(|e| !e.is_empty() && *e != crate::sim::ops::EMPTY) {
                *counts.entry(e.to_string()).or_default() += 1;
            }
        }
    }
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(e, _)| e).collect()
}

/// Everything the templates read, derived from the question and the dictionary.
struct Info<'a> {
    intent: Intent,
    question: &'a str,
    options: &'a [String],
    event: Option<String>,
    target: Option<String>,
    grounded: Option<Span>,
    frame_count: usize,
    keys: Vec<FrameIndex>,
    dict: &'a VisibleFrameDictionary,
}

impl<'a> Info<'a> {
    fn new(ctx: &PlannerContext<'a>) -> Self {
        let grounded = ctx
            .history
            .iter()
            .rev()
            .filter(|o| o.tool == "temporal_grounding" && o.ok())
            .find_map(|o| serde_json::from_value::<Span>(o.payload.as_ref()?.get("span")?.clone()).ok());
        Self {
            intent: classify(ctx.question),
            question: ctx.question,
            options: ctx.options,
            event: quoted(ctx.question).map(String::from),
            target: target_label(ctx.question),
            grounded,
            frame_count: ctx.frame_count,
            keys: ctx.dict.keys().collect(),
            dict: ctx.dict,
        }
    }

    fn whole(&self) -> Span {
        Span::new(0, self.frame_count.saturating_sub(1))
    }

    /// From the key before the first evidence frame to the key after the last.
    fn around(&self, frames: &BTreeSet<FrameIndex>) -> Option<Span> {
        let (&lo, &hi) = (frames.first()?, frames.last()?);
        let start = self.keys.iter().rev().find(|&&k| k < lo).map_or(0, |k| k + 1);
        let end = self.keys.iter().find(|&&k| k > hi).map_or(self.frame_count.saturating_sub(1), |k| k - 1);
        Some(Span::new(start.min(lo), end.max(hi)))
    }

    /// The grounded segment extended forward by its own length (at least one
    /// initial-sample stride).
    fn after_window(&self) -> Option<Span> {
        let g = self.grounded?;
        let stride = self.frame_count.div_ceil(16).max(1);
        let end = (g.end + g.len().max(stride)).min(self.frame_count.saturating_sub(1));
        Some(Span::new(g.start, end))
    }

    fn detections(&self) -> BTreeSet<FrameIndex> {
        self.target.as_deref().map(|t| detection_frames(self.dict, t)).unwrap_or_default()
    }

    /// Options named by captions, most frequent first; the quoted event is
    /// never a candidate.
    fn captioned_options(&self) -> Vec<String> {
        caption_events(self.dict)
            .into_iter()
            .filter(|e| self.options.iter().any(|o| o == e) && self.event.as_deref() != Some(e.as_str()))
            .collect()
    }

    /// Keys after the grounded segment, nearest first.
    fn keys_after_grounding(&self, n: usize) -> Vec<FrameIndex> {
        match self.grounded {
            Some(g) => self.keys.iter().copied().filter(|&k| k > g.end).take(n).collect(),
            None => Vec::new(),
        }
    }

    /// First key after the grounded segment whose caption names an option.
    fn next_option_key(&self) -> Option<FrameIndex> {
        let g = self.grounded?;
        self.keys.iter().copied().filter(|&k| k > g.end).find(|&k| {
            self.dict.get(k).is_some_and(|info| {
                info.annotations.iter().filter(|a| a.kind == AnnotationKind::Caption).any(|a| {
                    let text = a.payload.to_string();
                    self.options
                        .iter()
                        .any(|o| self.event.as_deref() != Some(o.as_str()) && contains_phrase(&text, o))
                })
            })
        })
    }
}

type Build = fn(&Info<'_>) -> Option<Value>;

struct Move {
    tool: &'static str,
    build: Build,
}

const fn mv(tool: &'static str, build: Build) -> Move {
    Move { tool, build }
}

fn b_ground(i: &Info<'_>) -> Option<Value> {
    i.event.as_ref().map(|e| json!({"description": e}))
}
fn b_detect(i: &Info<'_>) -> Option<Value> {
    i.target.as_ref().map(|t| json!({"label": t}))
}
fn b_detect_anchor(i: &Info<'_>) -> Option<Value> {
    if i.event.is_some() {
        None
    } else {
        b_detect(i)
    }
}
fn b_empty(_: &Info<'_>) -> Option<Value> {
    Some(json!({}))
}
fn b_question(i: &Info<'_>) -> Option<Value> {
    Some(json!({"question": i.question}))
}
fn b_trim_anchor(i: &Info<'_>) -> Option<Value> {
    i.around(&i.detections()).map(|s| json!({"span": s}))
}
fn b_select_text(i: &Info<'_>) -> Option<Value> {
    let hits = ocr_hits(i.dict);
    let mut q: Vec<&str> = hits.values().map(String::as_str).collect();
    q.sort_unstable();
    q.dedup();
    (!q.is_empty()).then(|| json!({"variant": "vanilla", "query": q.join(" ")}))
}
fn b_select_target(i: &Info<'_>) -> Option<Value> {
    Some(match &i.target {
        Some(t) => json!({"variant": "vanilla", "query": t}),
        None => json!({"variant": "vanilla"}),
    })
}
fn b_track(i: &Info<'_>) -> Option<Value> {
    let t = i.target.as_ref()?;
    Some(match i.around(&i.detections()) {
        Some(s) => json!({"label": t, "span": s}),
        None => json!({"label": t}),
    })
}
fn b_caption_after(i: &Info<'_>) -> Option<Value> {
    let frames = i.keys_after_grounding(4);
    (!frames.is_empty()).then(|| json!({"frames": frames}))
}
/// From the grounded start to the first later frame showing a candidate.
fn b_trim_to_next(i: &Info<'_>) -> Option<Value> {
    let g = i.grounded?;
    match i.next_option_key() {
        Some(k) => Some(json!({"span": Span::new(g.start, k)})),
        None => i.after_window().map(|s| json!({"span": s})),
    }
}
fn b_localize_theme(i: &Info<'_>) -> Option<Value> {
    i.captioned_options().first().map(|e| json!({"action": e}))
}
fn b_select_candidates(i: &Info<'_>) -> Option<Value> {
    let c = i.captioned_options();
    (!c.is_empty()).then(|| json!({"variant": "vanilla", "query": c.join(" ")}))
}

const TEXT: &[Move] = &[
    mv("temporal_grounding", b_ground),
    mv("object_detector", b_detect_anchor),
    mv("video_trimmer", b_trim_anchor),
    mv("text_detector", b_empty),
    mv("frame_selector", b_select_text),
    mv("text_detector", b_empty),
    mv("image_captioner", b_empty),
];

const COUNT: &[Move] = &[
    mv("object_detector", b_detect),
    mv("object_tracker", b_track),
    mv("image_qa", b_question),
    mv("frame_selector", b_select_target),
];

const ATTRIBUTE: &[Move] = &[
    mv("temporal_grounding", b_ground),
    mv("object_detector", b_detect),
    mv("frame_selector", b_select_target),
    mv("image_qa", b_question),
    mv("image_captioner", b_empty),
    mv("image_qa", b_question),
];

const ORDER: &[Move] = &[
    mv("temporal_grounding", b_ground),
    mv("image_captioner", b_caption_after),
    mv("video_trimmer", b_trim_to_next),
    mv("image_captioner", b_empty),
    mv("frame_selector", b_select_candidates),
    mv("image_captioner", b_empty),
];

const THEME: &[Move] = &[
    mv("image_captioner", b_empty),
    mv("action_localization", b_localize_theme),
    mv("image_captioner", b_empty),
    mv("frame_selector", b_select_candidates),
];

const GENERIC: &[Move] = &[
    mv("image_captioner", b_empty),
    mv("frame_selector", b_select_target),
    mv("image_qa", b_question),
];

fn template(intent: Intent) -> &'static [Move] {
    match intent {
        Intent::Text => TEXT,
        Intent::Count => COUNT,
        Intent::Order => ORDER,
        Intent::Attribute => ATTRIBUTE,
        Intent::Theme => THEME,
        Intent::Generic => GENERIC,
    }
}

/// Arguments for `tool` when no template entry supplies them.
fn default_args(tool: &str, i: &Info<'_>) -> Option<Value> {
    let span = i.grounded.unwrap_or_else(|| i.whole());
    match tool {
        "frame_selector" => b_select_target(i),
        "temporal_grounding" => b_ground(i),
        "temporal_referring" | "video_trimmer" | "action_recognition" => Some(json!({"span": span})),
        "action_localization" => Some(json!({"action": i.event.clone().unwrap_or_else(|| i.question.to_string())})),
        "object_detector" => b_detect(i),
        "object_tracker" => b_track(i),
        "image_captioner" | "text_detector" | "semantic_segmentation" => b_empty(i),
        "image_qa" | "image_grid_qa" | "multiple_image_qa" | "object_identifier" | "text_summarizer"
        | "video_summarizer" | "video_qa" => b_question(i),
        _ => None,
    }
}

const TEMPORAL_FALLBACK: &[&str] = &[
    "frame_selector",
    "video_trimmer",
    "action_localization",
    "temporal_referring",
    "temporal_grounding",
];

fn spatial_fallback(intent: Intent) -> &'static [&'static str] {
    match intent {
        Intent::Text => &["text_detector", "image_captioner", "image_qa", "object_detector"],
        Intent::Count | Intent::Attribute => &["image_qa", "image_captioner", "object_detector", "text_detector"],
        _ => &["image_captioner", "image_qa", "text_detector", "object_detector"],
    }
}

const BOTH_FALLBACK: &[&str] = &["multiple_image_qa", "image_grid_qa", "object_tracker", "action_recognition", "object_identifier"];

#[derive(Debug, Clone, Default)]
pub struct HeuristicPlanner;

impl HeuristicPlanner {
    pub fn new() -> Self {
        Self
    }

    fn from_template(&self, req: &SelectRequest<'_>, info: &Info<'_>) -> Option<PlannerDecision> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for m in template(info.intent) {
            let occurrence = seen.entry(m.tool).or_default();
            let nth = *occurrence;
            *occurrence += 1;
            if !req.allows(m.tool) {
                continue;
            }
            let calls = req.ctx.history.iter().filter(|o| o.tool == m.tool).count();
            if calls > nth {
                continue;
            }
            if let Some(args) = (m.build)(info) {
                return Some(PlannerDecision::invoke(m.tool, args, format!("{:?} template step", info.intent)));
            }
        }
        None
    }

    fn fallback(&self, req: &SelectRequest<'_>, info: &Info<'_>) -> Option<PlannerDecision> {
        let mut order: Vec<&str> = Vec::new();
        order.extend_from_slice(TEMPORAL_FALLBACK);
        order.extend_from_slice(spatial_fallback(info.intent));
        order.extend_from_slice(BOTH_FALLBACK);
        for c in req.allowed.iter().filter(|c| c.category != ToolCategory::General) {
            if !order.contains(&c.name.as_str()) {
                order.push(c.name.as_str());
            }
        }
        // Prefer the slot the scheduler is asking for: temporal tools first
        // only when no spatial tool is offered.
        let spatial_offered = req.allowed.iter().any(|c| c.category == ToolCategory::Spatial);
        if spatial_offered && !req.allowed.iter().any(|c| c.category == ToolCategory::Temporal) {
            order.retain(|t| !TEMPORAL_FALLBACK.contains(t));
        }
        for tool in order {
            if !req.allows(tool) {
                continue;
            }
            if let Some(args) = default_args(tool, info) {
                return Some(PlannerDecision::invoke(tool, args, "fallback"));
            }
        }
        None
    }

    fn terminal(&self, req: &SelectRequest<'_>, info: &Info<'_>) -> Option<PlannerDecision> {
        let has_notes = req.ctx.dict.annotation_count() > 0;
        let prefer: &[&str] = if has_notes {
            &["text_summarizer", "video_qa", "video_summarizer"]
        } else {
            &["video_qa", "video_summarizer", "text_summarizer"]
        };
        let pick = prefer
            .iter()
            .copied()
            .find(|t| req.allows(t))
            .or_else(|| req.allowed.iter().find(|c| c.category == ToolCategory::General).map(|c| c.name.as_str()))?;
        Some(PlannerDecision::invoke(pick, b_question(info).unwrap_or(json!({})), "answer from the gathered context"))
    }

    fn from_example(&self, req: &SelectRequest<'_>, info: &Info<'_>, examples: &[(String, Vec<String>)]) -> Option<PlannerDecision> {
        let q = content_tokens(info.question);
        let (_, chain) = examples
            .iter()
            .max_by_key(|(eq, _)| (overlap(&q, &content_tokens(eq)), std::cmp::Reverse(eq.len())))?;
        let next = chain.get(req.ctx.history.len())?;
        if !req.allows(next) {
            return None;
        }
        let args = template(info.intent)
            .iter()
            .find(|m| m.tool == next)
            .and_then(|m| (m.build)(info))
            .or_else(|| default_args(next, info))?;
        Some(PlannerDecision::invoke(next, args, "following the closest worked example"))
    }
}

impl PlannerBackend for HeuristicPlanner {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn select_tool(&mut self, req: &SelectRequest<'_>) -> Result<PlannerDecision, PlannerError> {
        let info = Info::new(&req.ctx);
        let general_allowed = req.allows_category(ToolCategory::General);
        let only_general = req.allowed.iter().all(|c| c.category == ToolCategory::General);
        if only_general {
            return self.terminal(req, &info).ok_or_else(|| PlannerError::Backend("no general tool offered".into()));
        }
        match req.ctx.guidance {
            Guidance::Direct if general_allowed => {
                if let Some(d) = self.terminal(req, &info) {
                    return Ok(d);
                }
            }
            Guidance::StepByStep if general_allowed && req.ctx.chain_len() >= 2 => {
                if let Some(d) = self.terminal(req, &info) {
                    return Ok(d);
                }
            }
            Guidance::Examples(ex) => {
                if let Some(d) = self.from_example(req, &info, ex) {
                    return Ok(d);
                }
            }
            _ => {}
        }
        if let Some(d) = self.from_template(req, &info) {
            return Ok(d);
        }
        if !req.must_invoke {
            if general_allowed {
                if let Some(d) = self.terminal(req, &info) {
                    return Ok(d);
                }
            }
            return Ok(PlannerDecision::sufficient("template exhausted"));
        }
        self.fallback(req, &info)
            .ok_or_else(|| PlannerError::Backend("no offered tool can be called".into()))
    }

    fn judge_sufficiency(&mut self, ctx: &PlannerContext<'_>) -> Result<bool, PlannerError> {
        Ok(option_in_context(ctx.dict, ctx.options).is_some())
    }

    fn generate_answer(&mut self, ctx: &PlannerContext<'_>) -> Result<String, PlannerError> {
        if let Some(a) = last_general_answer(ctx.history) {
            return Ok(a);
        }
        Ok(option_in_context(ctx.dict, ctx.options).map(|i| ctx.options[i].clone()).unwrap_or_else(|| "unknown".into()))
    }
}

/// Option whose literal text appears in the most textual annotations (ties
/// go to the longer option, then the earlier one).
pub fn option_in_context(dict: &VisibleFrameDictionary, options: &[String]) -> Option<usize> {
    let texts: Vec<String> = dict
        .entries()
        .values()
        .flat_map(|i| i.annotations.iter())
        .filter(|a| a.kind.is_textual())
        .map(|a| a.payload.to_string())
        .collect();
    let mut best: Option<(usize, usize, usize)> = None;
    for (i, o) in options.iter().enumerate() {
        let hits = texts.iter().filter(|t| contains_phrase(t, o)).count();
        if hits == 0 {
            continue;
        }
        let key = (hits, o.len());
        if best.is_none_or(|(_, h, l)| key > (h, l)) {
            best = Some((i, key.0, key.1));
        }
    }
    best.map(|(i, _, _)| i)
}
