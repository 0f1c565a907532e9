//! Planner backends: pick the next tool, judge sufficiency, produce the answer.

pub mod heuristic;
pub mod remote;
pub mod scripted;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frames::VisibleFrameDictionary;
use crate::model::FrameIndex;
use crate::registry::{ToolCard, ToolCategory};
use crate::text::contains_phrase;

pub use heuristic::HeuristicPlanner;
pub use remote::RemoteChatPlanner;
pub use scripted::ScriptedPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    InvokeTool,
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerDecision {
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_args: Option<Value>,
    #[serde(default)]
    pub rationale: String,
}

impl PlannerDecision {
    pub fn invoke(tool: &str, args: Value, rationale: impl Into<String>) -> Self {
        Self {
            kind: DecisionKind::InvokeTool,
            tool_name: Some(tool.to_string()),
            tool_args: Some(args),
            rationale: rationale.into(),
        }
    }

    pub fn sufficient(rationale: impl Into<String>) -> Self {
        Self { kind: DecisionKind::Sufficient, tool_name: None, tool_args: None, rationale: rationale.into() }
    }

    pub fn args(&self) -> Value {
        self.tool_args.clone().unwrap_or_else(|| Value::Object(Default::default()))
    }
}

/// A tool outcome as the planner sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: u32,
    pub tool: String,
    /// Slot the call filled; `General` for terminal calls.
    pub category: ToolCategory,
    pub args: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Observation {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Prompt flavour a strategy hands the planner.
#[derive(Debug, Clone, PartialEq)]
pub enum Guidance {
    /// No advice beyond the tool list.
    Direct,
    /// Asked to reason step by step before answering.
    StepByStep,
    /// Worked examples: (question, tool chain).
    Examples(Vec<(String, Vec<String>)>),
    /// The scheduler enforces the tool order.
    Constrained,
}

/// Everything a backend may read when deciding.
#[derive(Debug, Clone, Copy)]
pub struct PlannerContext<'a> {
    pub question: &'a str,
    pub options: &'a [String],
    /// The dictionary rendered under the context budget.
    pub context: &'a str,
    pub dict: &'a VisibleFrameDictionary,
    pub history: &'a [Observation],
    pub frame_count: usize,
    pub system_prompt: &'a str,
    pub guidance: &'a Guidance,
}

impl PlannerContext<'_> {
    pub fn visible(&self) -> Vec<FrameIndex> {
        self.dict.keys().collect()
    }

    /// Steps taken so far in non-general slots.
    pub fn chain_len(&self) -> usize {
        self.history.iter().filter(|o| o.category != ToolCategory::General).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelectRequest<'a> {
    pub ctx: PlannerContext<'a>,
    pub allowed: &'a [&'a ToolCard],
    /// The scheduler will not accept `Sufficient` at this step.
    pub must_invoke: bool,
    /// Set on the corrective retry after an invalid decision.
    pub correction: Option<&'a str>,
}

impl SelectRequest<'_> {
    pub fn allows(&self, tool: &str) -> bool {
        self.allowed.iter().any(|c| c.name == tool)
    }

    pub fn allows_category(&self, cat: ToolCategory) -> bool {
        self.allowed.iter().any(|c| c.category == cat)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("planner backend error: {0}")]
    Backend(String),
    #[error("could not parse an option from answer {raw:?}")]
    AnswerParse { raw: String },
}

pub trait PlannerBackend: Send {
    fn name(&self) -> &str;

    fn select_tool(&mut self, req: &SelectRequest<'_>) -> Result<PlannerDecision, PlannerError>;

    fn judge_sufficiency(&mut self, ctx: &PlannerContext<'_>) -> Result<bool, PlannerError>;

    /// Free-text answer; the scheduler maps it onto an option.
    fn generate_answer(&mut self, ctx: &PlannerContext<'_>) -> Result<String, PlannerError>;

    /// True once the backend has given up on its primary channel and is
    /// answering from its built-in fallback.
    fn degraded(&self) -> bool {
        false
    }
}

const LETTERS: &str = "ABCDEFGHIJ";

/// Maps answer text onto an option: a standalone option letter first, then the
/// longest option literal contained in the text.
pub fn parse_answer(raw: &str, options: &[String]) -> Result<usize, PlannerError> {
    let trimmed = raw.trim();
    let letter_of = |tok: &str| -> Option<usize> {
        let t = tok.trim_matches(|c: char| !c.is_alphanumeric());
        if t.len() != 1 {
            return None;
        }
        let i = LETTERS.find(t)?;
        (i < options.len()).then_some(i)
    };
    if let Some(i) = letter_of(trimmed) {
        return Ok(i);
    }
    // An exact option wins before letter scanning ("A" could be an option text).
    if let Some(i) = options.iter().position(|o| o.eq_ignore_ascii_case(trimmed)) {
        return Ok(i);
    }
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    for (wi, w) in words.iter().enumerate() {
        // Answer-style phrasings: "answer is B", "option (C)", "B)".
        let cue = wi > 0 && ["is", "option", "answer", "answer:"].contains(&words[wi - 1].to_lowercase().as_str());
        let bracket = w.starts_with('(') || w.ends_with(')') || w.ends_with(':') || w.ends_with('.');
        if cue || bracket || wi == 0 {
            if let Some(i) = letter_of(w).filter(|_| w.chars().any(|c| c.is_ascii_uppercase())) {
                return Ok(i);
            }
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for (i, o) in options.iter().enumerate() {
        if contains_phrase(trimmed, o) {
            let len = o.len();
            if best.is_none_or(|(_, l)| len > l) {
                best = Some((i, len));
            }
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| PlannerError::AnswerParse { raw: raw.to_string() })
}

/// Lines of an examples fixture: `question => tool, tool, ...`.
pub fn parse_examples(text: &str) -> Vec<(String, Vec<String>)> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                return None;
            }
            let (q, chain) = l.split_once("=>")?;
            let tools: Vec<String> =
                chain.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
            (!tools.is_empty()).then(|| (q.trim().to_string(), tools))
        })
        .collect()
}

pub const PROMPT_NO_CONSTRAINTS: &str = include_str!("../../prompts/no_constraints.txt");
pub const PROMPT_PROMPTING: &str = include_str!("../../prompts/prompting.txt");
pub const PROMPT_ICL: &str = include_str!("../../prompts/in_context_learning.txt");
pub const PROMPT_DISENTANGLED: &str = include_str!("../../prompts/disentangled.txt");
pub const PROMPT_STAR: &str = include_str!("../../prompts/star.txt");
