use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{PlannerBackend, PlannerContext, PlannerDecision, PlannerError, SelectRequest, LETTERS};
use crate::trace::{DecisionSource, EpisodeTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptAnswer {
    Index(usize),
    Text(String),
}

/// One episode's worth of canned planner output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub decisions: Vec<PlannerDecision>,
    #[serde(default)]
    pub sufficiency: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<ScriptAnswer>,
}

/// Replays a fixed decision queue, sufficiency schedule and answer.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPlanner {
    decisions: VecDeque<PlannerDecision>,
    sufficiency: VecDeque<bool>,
    answer: Option<ScriptAnswer>,
    last: Option<PlannerDecision>,
}

impl ScriptedPlanner {
    pub fn new(script: Script) -> Self {
        Self {
            decisions: script.decisions.into(),
            sufficiency: script.sufficiency.into(),
            answer: script.answer,
            last: None,
        }
    }

    /// Tool-only script with no sufficiency judgements and the answer taken
    /// from the terminal tool.
    pub fn from_tools(calls: &[(&str, serde_json::Value)]) -> Self {
        Self::new(Script {
            decisions: calls.iter().map(|(t, a)| PlannerDecision::invoke(t, a.clone(), "scripted")).collect(),
            ..Script::default()
        })
    }

    /// Script reproducing the primary planner's outputs in a recorded episode.
    pub fn script_from_trace(trace: &EpisodeTrace) -> Script {
        Script {
            decisions: trace
                .decision_log
                .iter()
                .filter(|d| d.source == DecisionSource::Primary && !d.retry)
                .map(|d| d.decision.clone())
                .collect(),
            sufficiency: trace
                .sufficiency_log
                .iter()
                .filter(|j| j.source == DecisionSource::Primary)
                .map(|j| j.sufficient)
                .collect(),
            answer: (trace.answer_source == DecisionSource::Primary)
                .then(|| trace.raw_answer.clone())
                .flatten()
                .map(ScriptAnswer::Text),
        }
    }

    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        Self::new(Self::script_from_trace(trace))
    }

    pub fn remaining(&self) -> usize {
        self.decisions.len()
    }
}

impl PlannerBackend for ScriptedPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn select_tool(&mut self, req: &SelectRequest<'_>) -> Result<PlannerDecision, PlannerError> {
        if req.correction.is_some() {
            // A script cannot change its mind.
            if let Some(d) = &self.last {
                return Ok(d.clone());
            }
        }
        let d = self
            .decisions
            .pop_front()
            .ok_or_else(|| PlannerError::Backend("script exhausted".to_string()))?;
        self.last = Some(d.clone());
        Ok(d)
    }

    fn judge_sufficiency(&mut self, _ctx: &PlannerContext<'_>) -> Result<bool, PlannerError> {
        Ok(self.sufficiency.pop_front().unwrap_or(false))
    }

    fn generate_answer(&mut self, ctx: &PlannerContext<'_>) -> Result<String, PlannerError> {
        match &self.answer {
            Some(ScriptAnswer::Index(i)) => LETTERS
                .chars()
                .nth(*i)
                .filter(|_| *i < ctx.options.len())
                .map(String::from)
                .ok_or_else(|| PlannerError::AnswerParse { raw: i.to_string() }),
            Some(ScriptAnswer::Text(t)) => Ok(t.clone()),
            None => Ok(super::heuristic::last_general_answer(ctx.history).unwrap_or_default()),
        }
    }
}
