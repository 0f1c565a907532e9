#![allow(dead_code)]
pub mod oracle;
pub mod laws;
pub mod mock;
pub mod traces;

use serde_json::Value;
use star_core::frames::VisibleFrameDictionary;
use star_core::model::{BBox, EventGT, FrameRecord, ObjectGT, QAInstance, QuestionKind, Roi3D, Span, SyntheticVideo, TextGT};
use star_core::rng::StreamKey;
use star_core::sim::{NoiseModel, SimToolkit};
use star_core::tool::{ToolBackend, ToolCall, ToolError, ToolResult};

/// Empty 1 fps video with the given events.
pub fn video(n: usize, events: &[(&str, usize, usize)]) -> SyntheticVideo {
    SyntheticVideo {
        video_id: "fixture".into(),
        duration_s: n as f64,
        fps: 1.0,
        frames: (0..n).map(FrameRecord::empty).collect(),
        events: events
            .iter()
            .map(|(l, a, b)| EventGT { label: l.to_string(), span: Span::new(*a, *b), region: None })
            .collect(),
    }
}

pub fn put_object(v: &mut SyntheticVideo, frame: usize, label: &str, id: u32, bbox: [f64; 4], color: Option<&str>) {
    v.frames[frame].objects.push(ObjectGT { label: label.into(), instance_id: id, bbox: bbox.into(), color: color.map(String::from) });
}

pub fn put_text(v: &mut SyntheticVideo, frame: usize, content: &str, bbox: [f64; 4]) {
    v.frames[frame].texts.push(TextGT { content: content.into(), bbox: bbox.into() });
}

pub fn qa(v: &SyntheticVideo, question: &str, options: &[&str], correct: usize, roi: (usize, usize), kind: QuestionKind) -> QAInstance {
    QAInstance {
        question_id: "q".into(),
        video_id: v.video_id.clone(),
        question: question.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        correct_index: correct,
        roi: Roi3D { span: Span::new(roi.0, roi.1), bbox: BBox::UNIT },
        question_kind: kind,
    }
}

pub fn dict(v: &SyntheticVideo, keys: &[usize]) -> VisibleFrameDictionary {
    VisibleFrameDictionary::with_keys(&v.video_id, v.frame_count(), keys.to_vec())
}

pub fn invoke_with(
    noise: &NoiseModel,
    tool: &str,
    args: &Value,
    v: &SyntheticVideo,
    q: &QAInstance,
    d: &VisibleFrameDictionary,
    ordinal: u32,
) -> Result<ToolResult, ToolError> {
    let stream = StreamKey::new(noise.seed, &q.question_id, tool, ordinal);
    let call = ToolCall { tool, args, video: v, qa: q, dict: d, stream: &stream };
    SimToolkit { noise: noise.clone() }.invoke(&call)
}

pub fn invoke(tool: &str, args: &Value, v: &SyntheticVideo, q: &QAInstance, d: &VisibleFrameDictionary) -> Result<ToolResult, ToolError> {
    invoke_with(&NoiseModel::noiseless(), tool, args, v, q, d, 0)
}
