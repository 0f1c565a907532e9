//! Simulated tool backends answering from synthetic ground truth.

pub mod ops;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::frames::{densify_keys, AnnotationKind, FrameSelection, Payload, TemporalUpdate, UpdateMode, VisibleFrameDictionary, INITIAL_SAMPLE_FRAMES};
use crate::model::{BBox, FrameIndex, Span};
use crate::registry::{RegistryError, ToolRegistry};
use crate::tool::{DictionaryEffect, FrameAnnotation, ToolBackend, ToolCall, ToolError, ToolResult};

use ops::{GeneralVariant, SelectorVariant, EMPTY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub seed: u64,
    pub p_miss: f64,
    pub jitter_frames: u32,
    pub p_general_correct: f64,
    pub p_roi_correct: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { seed: 0, p_miss: 0.1, jitter_frames: 2, p_general_correct: 0.55, p_roi_correct: 0.9 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { p_miss: 0.0, jitter_frames: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_miss", self.p_miss),
            ("p_general_correct", self.p_general_correct),
            ("p_roi_correct", self.p_roi_correct),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

pub const SIM_TOOLS: &[&str] = &[
    "frame_selector",
    "temporal_grounding",
    "temporal_referring",
    "video_trimmer",
    "action_localization",
    "object_detector",
    "bbox_marker",
    "image_captioner",
    "image_qa",
    "text_detector",
    "patch_zoomer",
    "semantic_segmentation",
    "google_search",
    "object_identifier",
    "action_recognition",
    "image_grid_qa",
    "multiple_image_qa",
    "python_code_generator",
    "object_tracker",
    "text_summarizer",
    "video_summarizer",
    "video_qa",
];

/// One backend serving every bundled card name.
#[derive(Debug, Clone, Default)]
pub struct SimToolkit {
    pub noise: NoiseModel,
}

/// The bundled cards, each bound to the simulator, sealed.
pub fn sim_registry(noise: NoiseModel) -> ToolRegistry {
    let mut r = ToolRegistry::default_cards();
    bind_sim(&mut r, noise).expect("bundled cards bind");
    r.seal()
}

pub fn bind_sim(registry: &mut ToolRegistry, noise: NoiseModel) -> Result<(), RegistryError> {
    let backend: Arc<dyn ToolBackend> = Arc::new(SimToolkit { noise });
    let names: Vec<String> = registry.names().filter(|n| SIM_TOOLS.contains(n)).map(String::from).collect();
    for n in names {
        registry.bind(&n, backend.clone())?;
    }
    Ok(())
}

fn invalid(tool: &str, reason: impl Into<String>) -> ToolError {
    ToolError::InvalidArgs { tool: tool.to_string(), reason: reason.into() }
}

fn arg_str<'a>(tool: &str, args: &'a Value, name: &str) -> Result<Option<&'a str>, ToolError> {
    match args.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(_) => Err(invalid(tool, format!("`{name}` must be a string"))),
    }
}

fn req_str<'a>(tool: &str, args: &'a Value, name: &str) -> Result<&'a str, ToolError> {
    arg_str(tool, args, name)?.ok_or_else(|| invalid(tool, format!("missing `{name}`")))
}

fn arg_span(call: &ToolCall<'_>, name: &str) -> Result<Option<Span>, ToolError> {
    let Some(v) = call.args.get(name).filter(|v| !v.is_null()) else { return Ok(None) };
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_i64()?, a[1].as_i64()?)))
        .ok_or_else(|| invalid(call.tool, format!("`{name}` must be [start, end]")))?;
    ops::check_span(call.video, call.tool, pair.0, pair.1).map(Some)
}

fn parse_bbox(tool: &str, v: &Value) -> Result<BBox, ToolError> {
    serde_json::from_value::<BBox>(v.clone()).map_err(|_| invalid(tool, "bbox must be [x0, y0, x1, y1]"))
}

fn arg_frame(call: &ToolCall<'_>, name: &str) -> Result<FrameIndex, ToolError> {
    let v = call.args.get(name).ok_or_else(|| invalid(call.tool, format!("missing `{name}`")))?;
    match v.as_i64() {
        Some(i) if i < 0 || i as usize >= call.dict.frame_count => {
            Err(ToolError::IndexOutOfRange { index: i, frame_count: call.dict.frame_count })
        }
        Some(i) => Ok(i as usize),
        None => Err(invalid(call.tool, format!("`{name}` must be a frame index"))),
    }
}

/// Explicit `frames`, or the current focus minus frames this tool has
/// already annotated (all of the focus if that leaves nothing).
fn target_frames(call: &ToolCall<'_>) -> Result<Vec<FrameIndex>, ToolError> {
    if let Some(v) = call.args.get("frames").filter(|v| !v.is_null()) {
        let arr = v.as_array().ok_or_else(|| invalid(call.tool, "`frames` must be a list"))?;
        let mut out = BTreeSet::new();
        for f in arr {
            let i = f.as_i64().ok_or_else(|| invalid(call.tool, "`frames` must hold indices"))?;
            if i < 0 || i as usize >= call.dict.frame_count {
                return Err(ToolError::IndexOutOfRange { index: i, frame_count: call.dict.frame_count });
            }
            if !call.dict.contains(i as usize) {
                return Err(ToolError::FrameNotVisible(i as usize));
            }
            out.insert(i as usize);
        }
        return Ok(out.into_iter().collect());
    }
    let focus = call.dict.focus_frames();
    let done = call.dict.frames_annotated_by(call.tool);
    let fresh: Vec<FrameIndex> = focus.iter().copied().filter(|f| !done.contains(f)).collect();
    Ok(if fresh.is_empty() { focus } else { fresh })
}

fn text_ann(frame: FrameIndex, kind: AnnotationKind, text: impl Into<String>) -> FrameAnnotation {
    FrameAnnotation { frame, kind, payload: Payload::Text(text.into()) }
}

fn annotations(list: Vec<FrameAnnotation>) -> DictionaryEffect {
    if list.is_empty() {
        DictionaryEffect::None
    } else {
        DictionaryEffect::Annotation { annotations: list }
    }
}

fn result(call: &ToolCall<'_>, payload: Value, frames_touched: Vec<FrameIndex>, effect: DictionaryEffect) -> ToolResult {
    ToolResult { tool_name: call.tool.to_string(), payload, frames_touched, dictionary_effect: effect }
}

fn keys_in(dict: &VisibleFrameDictionary, span: Span) -> Vec<FrameIndex> {
    dict.keys().filter(|k| span.contains(*k)).collect()
}

impl SimToolkit {
    pub fn new(noise: NoiseModel) -> Self {
        Self { noise }
    }

    fn frame_selector(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let variant = match arg_str(call.tool, call.args, "variant")? {
            None => SelectorVariant::Vanilla,
            Some(s) => SelectorVariant::parse(s).ok_or_else(|| invalid(call.tool, format!("unknown variant `{s}`")))?,
        };
        let query = arg_str(call.tool, call.args, "query")?.unwrap_or(&call.qa.question);
        let (sel, fallback) = ops::select_frames(variant, call.video, call.dict, query);
        let touched = if variant == SelectorVariant::Grid { call.dict.keys().collect() } else { Vec::new() };
        let mut payload = json!({"frames": sel, "variant": variant.as_str(), "fallback": fallback});
        if variant == SelectorVariant::Grid {
            let (r, c) = ops::grid_layout(call.dict.len());
            payload["grid"] = json!([r, c]);
        }
        let effect = if fallback {
            DictionaryEffect::None
        } else {
            DictionaryEffect::TemporalUpdate {
                update: TemporalUpdate { selection: FrameSelection::Set { frames: sel }, mode: UpdateMode::Retain },
            }
        };
        Ok(result(call, payload, touched, effect))
    }

    fn temporal_grounding(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let desc = req_str(call.tool, call.args, "description")?;
        let mut rng = call.stream.rng();
        let (span, event) = ops::ground_event(call.video, desc, self.noise.jitter_frames, &mut rng)?;
        let keys = densify_keys(span, INITIAL_SAMPLE_FRAMES);
        let effect = DictionaryEffect::TemporalUpdate {
            update: TemporalUpdate { selection: FrameSelection::set(keys), mode: UpdateMode::Add },
        };
        Ok(result(call, json!({"span": span, "event": event.label}), span.frames().collect(), effect))
    }

    fn temporal_referring(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let span = arg_span(call, "span")?.ok_or_else(|| invalid(call.tool, "missing `span`"))?;
        let text = ops::refer_interval(call.video, span);
        let anns = keys_in(call.dict, span).into_iter().map(|k| text_ann(k, AnnotationKind::Caption, &text)).collect();
        Ok(result(call, json!({"text": text, "span": span}), span.frames().collect(), annotations(anns)))
    }

    fn video_trimmer(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let span = arg_span(call, "span")?.ok_or_else(|| invalid(call.tool, "missing `span`"))?;
        let (update, added) = ops::trim_video(call.dict, span);
        let frames = update.selection.frames();
        Ok(result(
            call,
            json!({"frames": frames, "span": span}),
            added,
            DictionaryEffect::TemporalUpdate { update },
        ))
    }

    fn action_localization(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let action = req_str(call.tool, call.args, "action")?;
        let frames = ops::localize_action(call.video, call.dict, action);
        let effect = if frames.is_empty() {
            DictionaryEffect::None
        } else {
            DictionaryEffect::TemporalUpdate {
                update: TemporalUpdate { selection: FrameSelection::set(frames.iter().copied()), mode: UpdateMode::Add },
            }
        };
        Ok(result(call, json!({"frames": frames}), call.dict.keys().collect(), effect))
    }

    fn object_detector(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let label = ops::normalize_label(req_str(call.tool, call.args, "label")?);
        let frames = target_frames(call)?;
        let mut rng = call.stream.rng();
        let mut entries = Vec::new();
        let mut anns = Vec::new();
        for &f in &frames {
            let boxes = ops::detect_objects(call.video, call.dict, f, &label, self.noise.p_miss, &mut rng)?;
            entries.push(json!({"frame": f, "boxes": boxes}));
            if boxes.is_empty() {
                continue;
            }
            anns.push(FrameAnnotation {
                frame: f,
                kind: AnnotationKind::Detection,
                payload: Payload::Record(json!({"label": label, "boxes": boxes})),
            });
        }
        Ok(result(call, json!({"frames": entries}), frames, annotations(anns)))
    }

    fn bbox_marker(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let frame = arg_frame(call, "frame")?;
        if !call.dict.contains(frame) {
            return Err(ToolError::FrameNotVisible(frame));
        }
        let raw = call.args.get("bboxes").and_then(Value::as_array).ok_or_else(|| invalid(call.tool, "missing `bboxes`"))?;
        let boxes: Vec<BBox> = raw.iter().map(|v| parse_bbox(call.tool, v)).collect::<Result<_, _>>()?;
        let marks: Vec<Value> = ops::mark_bboxes(&boxes)?
            .into_iter()
            .map(|(m, b)| json!({"mark": m, "bbox": b}))
            .collect();
        let effect = if marks.is_empty() {
            DictionaryEffect::None
        } else {
            annotations(vec![FrameAnnotation {
                frame,
                kind: AnnotationKind::Marker,
                payload: Payload::Record(json!({"marks": marks})),
            }])
        };
        Ok(result(call, json!({"frame": frame, "marks": marks}), vec![frame], effect))
    }

    fn per_frame_text(
        &self,
        frames: Vec<FrameIndex>,
        kind: AnnotationKind,
        f: impl Fn(FrameIndex) -> Result<String, ToolError>,
    ) -> Result<(Vec<Value>, Vec<FrameAnnotation>, Vec<FrameIndex>), ToolError> {
        let mut entries = Vec::new();
        let mut anns = Vec::new();
        for &k in &frames {
            let text = f(k)?;
            entries.push(json!({"frame": k, "text": text}));
            anns.push(text_ann(k, kind, text));
        }
        Ok((entries, anns, frames))
    }

    fn image_captioner(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let frames = target_frames(call)?;
        let (entries, anns, touched) =
            self.per_frame_text(frames, AnnotationKind::Caption, |k| ops::caption_frame(call.video, call.dict, k))?;
        Ok(result(call, json!({"frames": entries}), touched, annotations(anns)))
    }

    fn image_qa(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let question = req_str(call.tool, call.args, "question")?;
        let frames = target_frames(call)?;
        let (entries, anns, touched) = self.per_frame_text(frames, AnnotationKind::QaAnswer, |k| {
            ops::answer_image_question(call.video, call.dict, k, question)
        })?;
        Ok(result(call, json!({"frames": entries}), touched, annotations(anns)))
    }

    /// Image QA folded over every visible frame.
    fn folded_qa(&self, call: &ToolCall<'_>, grid: bool) -> Result<ToolResult, ToolError> {
        let question = req_str(call.tool, call.args, "question")?;
        let frames: Vec<FrameIndex> = call.dict.keys().collect();
        let n = frames.len();
        let (entries, anns, touched) = self.per_frame_text(frames, AnnotationKind::QaAnswer, |k| {
            ops::answer_image_question(call.video, call.dict, k, question)
        })?;
        let mut payload = json!({"frames": entries});
        if grid {
            let (r, c) = ops::grid_layout(n);
            payload["grid"] = json!([r, c]);
        }
        Ok(result(call, payload, touched, annotations(anns)))
    }

    fn text_detector(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let frames = target_frames(call)?;
        let mut rng = call.stream.rng();
        let mut entries = Vec::new();
        let mut anns = Vec::new();
        for &f in &frames {
            let texts = ops::detect_text(call.video, call.dict, f, self.noise.p_miss, &mut rng)?;
            let contents: Vec<&str> = texts.iter().map(|(c, _)| c.as_str()).collect();
            let text = if contents.is_empty() { EMPTY.to_string() } else { contents.join(", ") };
            entries.push(json!({
                "frame": f,
                "texts": texts.iter().map(|(c, b)| json!({"content": c, "bbox": b})).collect::<Vec<_>>(),
            }));
            if !contents.is_empty() {
                anns.push(text_ann(f, AnnotationKind::Ocr, text));
            }
        }
        Ok(result(call, json!({"frames": entries}), frames, annotations(anns)))
    }

    fn patch_zoomer(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let frame = arg_frame(call, "frame")?;
        let bbox = parse_bbox(call.tool, call.args.get("bbox").unwrap_or(&Value::Null))?;
        let crop = ops::zoom_patch(call.dict, frame, bbox)?;
        let ann = FrameAnnotation { frame, kind: AnnotationKind::ZoomRef, payload: Payload::Record(json!({"crop": crop})) };
        Ok(result(call, json!({"frame": frame, "crop": crop}), vec![frame], annotations(vec![ann])))
    }

    fn semantic_segmentation(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let label = arg_str(call.tool, call.args, "label")?;
        let frames = target_frames(call)?;
        let mut rng = call.stream.rng();
        let mut entries = Vec::new();
        let mut anns = Vec::new();
        for &f in &frames {
            let regions: Vec<Value> = ops::segment(call.video, call.dict, f, label, self.noise.p_miss, &mut rng)?
                .into_iter()
                .map(|(l, b)| json!({"label": l, "bbox": b}))
                .collect();
            entries.push(json!({"frame": f, "regions": regions}));
            if regions.is_empty() {
                continue;
            }
            anns.push(FrameAnnotation {
                frame: f,
                kind: AnnotationKind::Detection,
                payload: Payload::Record(json!({"regions": regions})),
            });
        }
        Ok(result(call, json!({"frames": entries}), frames, annotations(anns)))
    }

    fn object_identifier(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let question = req_str(call.tool, call.args, "question")?;
        let labels = ops::identify_objects(call.video, question);
        Ok(result(call, json!({"labels": labels}), Vec::new(), DictionaryEffect::None))
    }

    fn action_recognition(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let span = arg_span(call, "span")?.ok_or_else(|| invalid(call.tool, "missing `span`"))?;
        let labels = ops::recognize_actions(call.video, span);
        let text = if labels.is_empty() { format!("actions: {EMPTY}") } else { format!("actions: {}", labels.join(", ")) };
        let anns = keys_in(call.dict, span).into_iter().map(|k| text_ann(k, AnnotationKind::Caption, &text)).collect();
        Ok(result(call, json!({"labels": labels}), span.frames().collect(), annotations(anns)))
    }

    fn object_tracker(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        let label = ops::normalize_label(req_str(call.tool, call.args, "label")?);
        let span = arg_span(call, "span")?.unwrap_or_else(|| ops::full_span(call.video));
        let mut rng = call.stream.rng();
        let count = ops::track_objects(call.video, span, &label, self.noise.p_miss, &mut rng);
        let text = format!("tracked {}", ops::count_phrase(count, &label));
        let anns = keys_in(call.dict, span).into_iter().map(|k| text_ann(k, AnnotationKind::Custom, &text)).collect();
        Ok(result(
            call,
            json!({"count": count, "label": label, "span": span}),
            span.frames().collect(),
            annotations(anns),
        ))
    }

    fn general(&self, call: &ToolCall<'_>, variant: GeneralVariant) -> Result<ToolResult, ToolError> {
        let mut rng = call.stream.rng();
        let (index, covered) = ops::general_answer(variant, call.qa, call.dict, call.video, &self.noise, &mut rng);
        let touched = match variant {
            GeneralVariant::TextSummarizer => Vec::new(),
            _ => (0..call.video.frame_count()).collect(),
        };
        let answer = call.qa.options[index].clone();
        let payload = match variant {
            GeneralVariant::VideoSummarizer => {
                json!({"answer": answer, "summary": format!("The video mostly shows {answer}."), "covered": covered})
            }
            _ => json!({"answer": answer, "covered": covered}),
        };
        Ok(result(call, payload, touched, DictionaryEffect::None))
    }
}

impl ToolBackend for SimToolkit {
    fn invoke(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        match call.tool {
            "frame_selector" => self.frame_selector(call),
            "temporal_grounding" => self.temporal_grounding(call),
            "temporal_referring" => self.temporal_referring(call),
            "video_trimmer" => self.video_trimmer(call),
            "action_localization" => self.action_localization(call),
            "object_detector" => self.object_detector(call),
            "bbox_marker" => self.bbox_marker(call),
            "image_captioner" => self.image_captioner(call),
            "image_qa" => self.image_qa(call),
            "text_detector" => self.text_detector(call),
            "patch_zoomer" => self.patch_zoomer(call),
            "semantic_segmentation" => self.semantic_segmentation(call),
            "object_identifier" => self.object_identifier(call),
            "action_recognition" => self.action_recognition(call),
            "image_grid_qa" => self.folded_qa(call, true),
            "multiple_image_qa" => self.folded_qa(call, false),
            "object_tracker" => self.object_tracker(call),
            "google_search" | "python_code_generator" => {
                let payload = ops::canned(call.tool, call.args)?;
                Ok(result(call, payload, Vec::new(), DictionaryEffect::None))
            }
            name => match GeneralVariant::from_tool(name) {
                Some(v) => self.general(call, v),
                None => Err(ToolError::ToolNotFound(name.to_string())),
            },
        }
    }
}
