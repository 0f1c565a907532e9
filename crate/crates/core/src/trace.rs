//! Episode traces and their JSONL encoding.
//!
//! A trace file holds any number of episodes. Each episode is a header line
//! (`"type": "episode"`) followed by exactly `step_count` step lines.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::FrameIndex;
use crate::planner::PlannerDecision;
use crate::registry::ToolCategory;

/// Short stable digest of a JSON value (maps serialize in key order).
pub fn digest(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).unwrap_or_default();
    hex::encode(&Sha256::digest(&bytes)[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Primary,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: u32,
    pub source: DecisionSource,
    /// True for the corrective re-ask after a rejected decision.
    pub retry: bool,
    pub decision: PlannerDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyRecord {
    pub step: u32,
    pub source: DecisionSource,
    pub sufficient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeExit {
    Sufficient,
    IterationCap,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u32,
    pub allowed_categories: Vec<ToolCategory>,
    pub tool_name: String,
    /// Slot the call filled; differs from the card category only for Both tools.
    pub effective_category: ToolCategory,
    pub args: Value,
    pub args_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_digest: Option<String>,
    pub effect: String,
    #[serde(default)]
    pub keys_added: Vec<FrameIndex>,
    #[serde(default)]
    pub keys_removed: Vec<FrameIndex>,
    #[serde(default)]
    pub annotations_added: usize,
    pub frames_touched: Vec<FrameIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub question_id: String,
    pub video_id: String,
    pub question_kind: String,
    pub strategy: String,
    pub planner: String,
    pub frame_count: usize,
    pub initial_keys: Vec<FrameIndex>,
    pub steps: Vec<TraceStep>,
    pub decision_log: Vec<DecisionRecord>,
    pub sufficiency_log: Vec<SufficiencyRecord>,
    pub answer_source: DecisionSource,
    #[serde(default)]
    pub raw_answer: Option<String>,
    #[serde(default)]
    pub final_answer: Option<usize>,
    pub correct: bool,
    pub shortcut: bool,
    pub exit: EpisodeExit,
    #[serde(default)]
    pub protocol_violations: u32,
    #[serde(default)]
    pub error: Option<String>,
    pub final_keys: Vec<FrameIndex>,
    /// Whether the final dictionary covered the question's region of interest.
    pub roi_covered: bool,
    pub wall_time_ms: f64,
}

impl EpisodeTrace {
    /// Copy with every wall-time field zeroed, for equality checks across runs.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        t.wall_time_ms = 0.0;
        for s in &mut t.steps {
            s.wall_time_ms = 0.0;
        }
        t
    }

    pub fn tool_names(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.tool_name.as_str())
    }
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TraceParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TraceParseError::Malformed { line, .. } => Some(*line),
            TraceParseError::Io(_) => None,
        }
    }
}

fn tagged(kind: &str, v: Value) -> Map<String, Value> {
    let mut m = match v {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    m.insert("type".into(), Value::String(kind.into()));
    m
}

pub fn write_jsonl(out: &mut impl Write, traces: &[EpisodeTrace]) -> std::io::Result<()> {
    for t in traces {
        let mut header = tagged("episode", serde_json::to_value(t).map_err(std::io::Error::other)?);
        header.remove("steps");
        header.insert("step_count".into(), t.steps.len().into());
        serde_json::to_writer(&mut *out, &header).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
        for s in &t.steps {
            let line = tagged("step", serde_json::to_value(s).map_err(std::io::Error::other)?);
            serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn to_jsonl(traces: &[EpisodeTrace]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, traces).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<EpisodeTrace>, TraceParseError> {
    let mut out: Vec<EpisodeTrace> = Vec::new();
    let mut pending = 0usize;
    let mut last_line = 0usize;
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TraceParseError::Malformed { line: n, message };
        let mut obj = match serde_json::from_str::<Value>(&line).map_err(|e| bad(e.to_string()))? {
            Value::Object(m) => m,
            _ => return Err(bad("expected a json object".into())),
        };
        let kind = obj.remove("type").and_then(|v| v.as_str().map(String::from));
        match kind.as_deref() {
            Some("episode") => {
                if pending > 0 {
                    return Err(bad(format!("episode header while {pending} steps are still expected")));
                }
                let count = obj
                    .remove("step_count")
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| bad("header is missing step_count".into()))?;
                obj.insert("steps".into(), Value::Array(Vec::new()));
                let t: EpisodeTrace = serde_json::from_value(Value::Object(obj)).map_err(|e| bad(e.to_string()))?;
                pending = count as usize;
                out.push(t);
            }
            Some("step") => {
                if pending == 0 {
                    return Err(bad("step line without an open episode".into()));
                }
                let s: TraceStep = serde_json::from_value(Value::Object(obj)).map_err(|e| bad(e.to_string()))?;
                out.last_mut().expect("open episode").steps.push(s);
                pending -= 1;
            }
            Some(other) => return Err(bad(format!("unknown line type {other:?}"))),
            None => return Err(bad("line has no type".into())),
        }
    }
    if pending > 0 {
        return Err(TraceParseError::Malformed {
            line: last_line + 1,
            message: format!("unexpected end of file: {pending} steps missing"),
        });
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<EpisodeTrace>, TraceParseError> {
    read_jsonl(text.as_bytes())
}

pub fn write_trace(path: &Path, traces: &[EpisodeTrace]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_jsonl(&mut f, traces)?;
    f.flush()
}

pub fn read_trace(path: &Path) -> Result<Vec<EpisodeTrace>, TraceParseError> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}
