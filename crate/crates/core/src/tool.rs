//! Invocation contract shared by in-process simulators and remote tool servers.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frames::{AnnotationKind, DictError, Payload, TemporalUpdate, VisibleFrameDictionary};
use crate::model::{FrameIndex, QAInstance, SyntheticVideo};
use crate::rng::StreamKey;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ToolError {
    #[error("tool not found: {0}")]
    ToolNotFound(String),
    #[error("invalid arguments for {tool}: {reason}")]
    InvalidArgs { tool: String, reason: String },
    #[error("frame {0} is not visible")]
    FrameNotVisible(FrameIndex),
    #[error("frame index {index} out of range for {frame_count} frames")]
    IndexOutOfRange { index: i64, frame_count: usize },
    #[error("no event matches '{0}'")]
    EventNotFound(String),
    #[error("degenerate region {0:?}")]
    InvalidRegion([f64; 4]),
    #[error("tool call timed out after {0} ms")]
    ToolTimeout(u64),
    #[error("tool server error: HTTP {status}: {body}")]
    ToolServerError { status: u16, body: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("transport error: {0}")]
    Transport(String),
}

impl From<DictError> for ToolError {
    fn from(e: DictError) -> Self {
        match e {
            DictError::FrameNotVisible(f) => ToolError::FrameNotVisible(f),
            DictError::IndexOutOfRange { index, frame_count } => {
                ToolError::IndexOutOfRange { index: index as i64, frame_count }
            }
            other => ToolError::InvalidArgs { tool: String::new(), reason: other.to_string() },
        }
    }
}

/// An annotation a tool wants written; the scheduler stamps step and source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub frame: FrameIndex,
    pub kind: AnnotationKind,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryEffect {
    TemporalUpdate { update: TemporalUpdate },
    Annotation { annotations: Vec<FrameAnnotation> },
    None,
}

impl DictionaryEffect {
    pub fn label(&self) -> &'static str {
        match self {
            DictionaryEffect::TemporalUpdate { .. } => "temporal_update",
            DictionaryEffect::Annotation { .. } => "annotation",
            DictionaryEffect::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool_name: String,
    pub payload: Value,
    /// Every frame whose content the tool read. Frame metrics use only this.
    pub frames_touched: Vec<FrameIndex>,
    pub dictionary_effect: DictionaryEffect,
}

/// Everything a backend may read for one invocation.
#[derive(Debug, Clone, Copy)]
pub struct ToolCall<'a> {
    pub tool: &'a str,
    pub args: &'a Value,
    pub video: &'a SyntheticVideo,
    pub qa: &'a QAInstance,
    pub dict: &'a VisibleFrameDictionary,
    pub stream: &'a StreamKey,
}

pub trait ToolBackend: Send + Sync {
    fn invoke(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError>;
}
