//! The episode loop and the strategies that constrain it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frames::{Annotation, VisibleFrameDictionary};
use crate::model::{QAInstance, SyntheticVideo};
use crate::planner::{
    parse_answer, parse_examples, DecisionKind, Guidance, HeuristicPlanner, Observation, PlannerBackend,
    PlannerContext, PlannerDecision, PlannerError, SelectRequest, PROMPT_DISENTANGLED, PROMPT_ICL,
    PROMPT_NO_CONSTRAINTS, PROMPT_PROMPTING, PROMPT_STAR,
};
use crate::registry::{ToolCard, ToolCategory, ToolRegistry};
use crate::rng::StreamKey;
use crate::sim::ops::covers_roi;
use crate::tool::{DictionaryEffect, ToolCall, ToolError, ToolResult};
use crate::trace::{
    digest, DecisionRecord, DecisionSource, EpisodeExit, EpisodeTrace, SufficiencyRecord, TraceStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "no-constraints")]
    NoConstraints,
    #[serde(rename = "prompting")]
    Prompting,
    #[serde(rename = "icl")]
    InContextLearning,
    #[serde(rename = "disentangled")]
    Disentangled,
    #[serde(rename = "star")]
    StarInterleaved,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::NoConstraints,
        Strategy::Prompting,
        Strategy::InContextLearning,
        Strategy::Disentangled,
        Strategy::StarInterleaved,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::NoConstraints => "no-constraints",
            Strategy::Prompting => "prompting",
            Strategy::InContextLearning => "icl",
            Strategy::Disentangled => "disentangled",
            Strategy::StarInterleaved => "star",
        }
    }

    pub fn system_prompt(&self) -> &'static str {
        match self {
            Strategy::NoConstraints => PROMPT_NO_CONSTRAINTS,
            Strategy::Prompting => PROMPT_PROMPTING,
            Strategy::InContextLearning => PROMPT_ICL,
            Strategy::Disentangled => PROMPT_DISENTANGLED,
            Strategy::StarInterleaved => PROMPT_STAR,
        }
    }

    pub fn guidance(&self) -> Guidance {
        match self {
            Strategy::NoConstraints => Guidance::Direct,
            Strategy::Prompting => Guidance::StepByStep,
            Strategy::InContextLearning => Guidance::Examples(parse_examples(PROMPT_ICL)),
            Strategy::Disentangled | Strategy::StarInterleaved => Guidance::Constrained,
        }
    }

    /// Strategies under which the scheduler, not the planner, decides when
    /// a general tool may run.
    pub fn is_constrained(&self) -> bool {
        matches!(self, Strategy::Disentangled | Strategy::StarInterleaved)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected no-constraints, prompting, icl, disentangled or star)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SufficiencyCheck {
    EveryStep,
    #[serde(rename = "fixed_i")]
    FixedI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub max_iterations: u32,
    pub sufficiency_check: SufficiencyCheck,
    pub shortcut_min_steps: u32,
    pub context_budget: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::StarInterleaved,
            max_iterations: 12,
            sufficiency_check: SufficiencyCheck::EveryStep,
            shortcut_min_steps: 4,
            context_budget: 8000,
        }
    }
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations < 1 {
            return Err("max_iterations must be at least 1".into());
        }
        if self.context_budget == 0 {
            return Err("context_budget must be positive".into());
        }
        Ok(())
    }

    /// Non-general calls allowed: the initial call plus one per iteration.
    pub fn call_cap(&self) -> usize {
        self.max_iterations as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Temporal,
    Spatial,
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub step: u32,
    pub first_category: Option<ToolCategory>,
    /// Effective category of the latest non-general call.
    pub last_category: Option<ToolCategory>,
    pub phase: Phase,
    pub temporal_calls: usize,
    pub spatial_calls: usize,
    pub terminal: bool,
    pub finished: bool,
    pub dict: VisibleFrameDictionary,
}

impl EpisodeState {
    pub fn new(dict: VisibleFrameDictionary) -> Self {
        Self {
            step: 0,
            first_category: None,
            last_category: None,
            phase: Phase::Temporal,
            temporal_calls: 0,
            spatial_calls: 0,
            terminal: false,
            finished: false,
            dict,
        }
    }

    pub fn chain_len(&self) -> usize {
        self.temporal_calls + self.spatial_calls
    }

    /// Slot the next non-general call fills under alternation.
    fn next_slot(&self) -> ToolCategory {
        match self.last_category {
            Some(ToolCategory::Temporal) => ToolCategory::Spatial,
            _ => ToolCategory::Temporal,
        }
    }

    /// Category a call of `card` counts as given the current slot.
    pub fn effective_category(&self, card: &ToolCard, strategy: Strategy) -> ToolCategory {
        match card.category {
            ToolCategory::Both => match strategy {
                Strategy::Disentangled => match self.phase {
                    Phase::Temporal => ToolCategory::Temporal,
                    Phase::Spatial => ToolCategory::Spatial,
                },
                _ => self.next_slot(),
            },
            c => c,
        }
    }

    fn record(&mut self, cat: ToolCategory) {
        match cat {
            ToolCategory::Temporal => self.temporal_calls += 1,
            ToolCategory::Spatial => self.spatial_calls += 1,
            _ => return,
        }
        self.first_category.get_or_insert(cat);
        self.last_category = Some(cat);
    }
}

/// Cards the planner may choose from at this point of the episode.
pub fn allowed_toolset<'r>(state: &EpisodeState, config: &StrategyConfig, registry: &'r ToolRegistry) -> Vec<&'r ToolCard> {
    let pick = |cats: &[ToolCategory]| -> Vec<&'r ToolCard> {
        registry.cards().filter(|c| cats.contains(&c.category)).collect()
    };
    if state.terminal {
        return pick(&[ToolCategory::General]);
    }
    match config.strategy {
        Strategy::StarInterleaved => match state.last_category {
            None => pick(&[ToolCategory::Temporal, ToolCategory::Spatial, ToolCategory::Both]),
            Some(ToolCategory::Temporal) => pick(&[ToolCategory::Spatial, ToolCategory::Both]),
            Some(_) => pick(&[ToolCategory::Temporal, ToolCategory::Both]),
        },
        Strategy::Disentangled => match state.phase {
            Phase::Temporal => pick(&[ToolCategory::Temporal, ToolCategory::Both]),
            Phase::Spatial => pick(&[ToolCategory::Spatial, ToolCategory::Both]),
        },
        _ => registry.cards().collect(),
    }
}

fn categories_of(cards: &[&ToolCard]) -> Vec<ToolCategory> {
    ToolCategory::ALL.into_iter().filter(|c| cards.iter().any(|x| x.category == *c)).collect()
}

/// True when a general tool ran before the chain held both a temporal and
/// a spatial call, or when the chain is shorter than the configured minimum.
pub fn detect_shortcut(trace: &EpisodeTrace, config: &StrategyConfig) -> bool {
    let mut temporal = false;
    let mut spatial = false;
    let mut chain = 0usize;
    for s in &trace.steps {
        match s.effective_category {
            ToolCategory::General => {
                if !(temporal && spatial) {
                    return true;
                }
            }
            ToolCategory::Temporal => {
                temporal = true;
                chain += 1;
            }
            ToolCategory::Spatial => {
                spatial = true;
                chain += 1;
            }
            ToolCategory::Both => chain += 1,
        }
    }
    chain < config.shortcut_min_steps as usize
}

#[derive(Debug, Error)]
#[error("episode {episode_id} aborted: {reason}")]
pub struct EpisodeAborted {
    pub episode_id: String,
    pub reason: String,
    /// Everything recorded up to the failure.
    pub trace: Box<EpisodeTrace>,
}

/// Identifies the episode's random streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSeed {
    pub global_seed: u64,
    pub episode_id: String,
}

/// Runs the tool, checks its output and applies the effect to the dictionary.
/// Returns the result and the number of annotations written.
fn execute(
    registry: &ToolRegistry,
    card: &ToolCard,
    args: &Value,
    video: &SyntheticVideo,
    qa: &QAInstance,
    dict: &mut VisibleFrameDictionary,
    stream: &StreamKey,
    step: u32,
) -> (Result<(ToolResult, Vec<usize>, Vec<usize>, usize), ToolError>, Vec<usize>) {
    let Some(backend) = registry.backend(&card.name) else {
        return (Err(ToolError::ToolNotFound(card.name.clone())), Vec::new());
    };
    let call = ToolCall { tool: &card.name, args, video, qa, dict, stream };
    let result = match backend.invoke(&call) {
        Ok(r) => r,
        Err(e) => return (Err(e), Vec::new()),
    };
    let n = video.frame_count();
    if let Some(bad) = result.frames_touched.iter().find(|&&f| f >= n) {
        return (Err(ToolError::ProtocolViolation(format!("frames_touched holds {bad}, video has {n} frames"))), Vec::new());
    }
    let touched = result.frames_touched.clone();
    if let Err(e) = card.validate_output(&result.payload) {
        return (Err(ToolError::ProtocolViolation(format!("output of {}: {e}", card.name))), touched);
    }
    let applied = match &result.dictionary_effect {
        DictionaryEffect::TemporalUpdate { update } => {
            dict.apply_temporal_update(update, step, &card.name).map(|d| (d.added, d.removed, 0)).map_err(ToolError::from)
        }
        DictionaryEffect::Annotation { annotations } => {
            if let Some(a) = annotations.iter().find(|a| !dict.contains(a.frame)) {
                Err(ToolError::FrameNotVisible(a.frame))
            } else {
                for a in annotations {
                    let ann = Annotation { source_tool: card.name.clone(), kind: a.kind, payload: a.payload.clone(), step };
                    if let Err(e) = dict.annotate(a.frame, ann) {
                        return (Err(e.into()), touched);
                    }
                }
                Ok((Vec::new(), Vec::new(), annotations.len()))
            }
        }
        DictionaryEffect::None => Ok((Vec::new(), Vec::new(), 0)),
    };
    match applied {
        Ok((added, removed, notes)) => (Ok((result, added, removed, notes)), touched),
        Err(e) => (Err(e), touched),
    }
}

/// Why a planner decision cannot be accepted, if it cannot.
fn reject_reason(d: &PlannerDecision, allowed: &[&ToolCard], must_invoke: bool) -> Option<String> {
    match d.kind {
        DecisionKind::Sufficient if must_invoke => Some("a tool must be invoked at this step".into()),
        DecisionKind::Sufficient => None,
        DecisionKind::InvokeTool => {
            let Some(name) = d.tool_name.as_deref() else {
                return Some("invoke_tool without tool_name".into());
            };
            let Some(card) = allowed.iter().find(|c| c.name == name) else {
                let names: Vec<&str> = allowed.iter().map(|c| c.name.as_str()).collect();
                return Some(format!("`{name}` is not offered at this step; choose one of: {}", names.join(", ")));
            };
            card.validate_args(&d.args()).err().map(|e| format!("arguments for `{name}`: {e}"))
        }
    }
}

struct Driver<'a> {
    primary: &'a mut dyn PlannerBackend,
    fallback: Option<HeuristicPlanner>,
}

impl Driver<'_> {
    fn source(&self) -> DecisionSource {
        if self.fallback.is_some() || self.primary.degraded() {
            DecisionSource::Fallback
        } else {
            DecisionSource::Primary
        }
    }

    fn backend(&mut self) -> &mut dyn PlannerBackend {
        match &mut self.fallback {
            Some(h) => h,
            None => &mut *self.primary,
        }
    }
}

/// Runs one episode. Planner or dictionary failures abort with the partial
/// trace; tool failures are recorded and the loop goes on.
pub fn run_episode(
    video: &SyntheticVideo,
    qa: &QAInstance,
    registry: &ToolRegistry,
    planner: &mut dyn PlannerBackend,
    config: &StrategyConfig,
    seed: &EpisodeSeed,
) -> Result<EpisodeTrace, EpisodeAborted> {
    let started = Instant::now();
    let guidance = config.strategy.guidance();
    let system_prompt = config.strategy.system_prompt();
    let mut trace = EpisodeTrace {
        episode_id: seed.episode_id.clone(),
        question_id: qa.question_id.clone(),
        video_id: qa.video_id.clone(),
        question_kind: qa.question_kind.as_str().to_string(),
        strategy: config.strategy.as_str().to_string(),
        planner: planner.name().to_string(),
        frame_count: video.frame_count(),
        initial_keys: Vec::new(),
        steps: Vec::new(),
        decision_log: Vec::new(),
        sufficiency_log: Vec::new(),
        answer_source: DecisionSource::Primary,
        raw_answer: None,
        final_answer: None,
        correct: false,
        shortcut: false,
        exit: EpisodeExit::Aborted,
        protocol_violations: 0,
        error: None,
        final_keys: Vec::new(),
        roi_covered: false,
        wall_time_ms: 0.0,
    };
    let abort = |mut trace: EpisodeTrace, reason: String, started: Instant| {
        trace.exit = EpisodeExit::Aborted;
        trace.error = Some(reason.clone());
        trace.wall_time_ms = started.elapsed().as_secs_f64() * 1000.0;
        EpisodeAborted { episode_id: trace.episode_id.clone(), reason, trace: Box::new(trace) }
    };
    let dict = match VisibleFrameDictionary::init_uniform_sample(video) {
        Ok(d) => d,
        Err(e) => return Err(abort(trace, e.to_string(), started)),
    };
    trace.initial_keys = dict.keys().collect();
    let mut state = EpisodeState::new(dict);
    let mut history: Vec<Observation> = Vec::new();
    let mut ordinals: BTreeMap<String, u32> = BTreeMap::new();
    let mut driver = Driver { primary: planner, fallback: None };
    let cap = config.call_cap();
    let every_step = config.sufficiency_check == SufficiencyCheck::EveryStep;
    let strategy = config.strategy;
    let star_min = (config.shortcut_min_steps as usize).min(cap);
    let disentangled_switch = (cap).div_ceil(2);
    let mut pending_general: Option<PlannerDecision> = None;

    macro_rules! ctx {
        ($rendered:expr) => {
            PlannerContext {
                question: &qa.question,
                options: &qa.options,
                context: $rendered,
                dict: &state.dict,
                history: &history,
                frame_count: video.frame_count(),
                system_prompt,
                guidance: &guidance,
            }
        };
    }

    let exit = 'episode: loop {
        if state.chain_len() >= cap {
            break EpisodeExit::IterationCap;
        }
        if strategy == Strategy::Disentangled && state.phase == Phase::Temporal {
            let forced = state.temporal_calls >= config.max_iterations as usize
                || (!every_step && state.temporal_calls >= disentangled_switch);
            if forced || allowed_toolset(&state, config, registry).is_empty() {
                state.phase = Phase::Spatial;
            }
        }

        // Sufficiency.
        let judge_now = every_step
            && match strategy {
                Strategy::StarInterleaved => state.chain_len() >= star_min,
                Strategy::Disentangled => match state.phase {
                    Phase::Temporal => state.temporal_calls >= 1,
                    Phase::Spatial => state.spatial_calls >= 1,
                },
                _ => state.chain_len() >= 1,
            };
        let must_invoke = if !every_step {
            true
        } else {
            match strategy {
                Strategy::StarInterleaved => state.chain_len() < star_min,
                Strategy::Disentangled => match state.phase {
                    Phase::Temporal => state.temporal_calls == 0,
                    Phase::Spatial => state.spatial_calls == 0,
                },
                _ => false,
            }
        };
        let mut enough = false;
        if judge_now {
            let rendered = state.dict.render_context(config.context_budget);
            let judged = driver.backend().judge_sufficiency(&ctx!(&rendered));
            let source = driver.source();
            match judged {
                Ok(b) => {
                    trace.sufficiency_log.push(SufficiencyRecord { step: state.step, source, sufficient: b });
                    enough = b;
                }
                Err(e) => return Err(abort(trace, e.to_string(), started)),
            }
        }

        let allowed = allowed_toolset(&state, config, registry);
        let mut decision = None;
        if !enough && !allowed.is_empty() {
            let rendered = state.dict.render_context(config.context_budget);
            let mut correction: Option<String> = None;
            loop {
                let retry = correction.is_some();
                let req = SelectRequest { ctx: ctx!(&rendered), allowed: &allowed, must_invoke, correction: correction.as_deref() };
                let d = match driver.backend().select_tool(&req) {
                    Ok(d) => d,
                    Err(e) => return Err(abort(trace, e.to_string(), started)),
                };
                let source = driver.source();
                let rejected = reject_reason(&d, &allowed, must_invoke);
                trace.decision_log.push(DecisionRecord { step: state.step, source, retry, decision: d.clone(), rejected: rejected.clone() });
                match rejected {
                    None => {
                        decision = Some(d);
                        break;
                    }
                    Some(r) if source == DecisionSource::Fallback => {
                        return Err(abort(trace, format!("fallback planner made an invalid decision: {r}"), started));
                    }
                    Some(r) if !retry => correction = Some(format!("Your last decision was rejected: {r}.")),
                    Some(_) => {
                        trace.protocol_violations += 1;
                        driver.fallback = Some(HeuristicPlanner::new());
                        correction = None;
                    }
                }
            }
        }
        let decision = match decision {
            Some(d) if d.kind == DecisionKind::InvokeTool => d,
            _ => {
                // Sufficient, or nothing left to offer.
                if strategy == Strategy::Disentangled && state.phase == Phase::Temporal {
                    state.phase = Phase::Spatial;
                    continue 'episode;
                }
                break EpisodeExit::Sufficient;
            }
        };
        let name = decision.tool_name.clone().unwrap_or_default();
        let card = registry.card(&name).expect("validated against the allowed set");
        if card.category == ToolCategory::General {
            pending_general = Some(decision);
            break EpisodeExit::Sufficient;
        }
        let effective = state.effective_category(card, strategy);
        let step_allowed = categories_of(&allowed);
        run_step(
            &mut trace, &mut state, &mut history, &mut ordinals, registry, card, &decision, effective, step_allowed, video, qa, seed,
        );
    };

    // Terminal general call, then the answer.
    state.terminal = true;
    let general = allowed_toolset(&state, config, registry);
    if !general.is_empty() {
        let decision = match pending_general.take() {
            Some(d) => d,
            None => {
                let rendered = state.dict.render_context(config.context_budget);
                let mut correction: Option<String> = None;
                loop {
                    let retry = correction.is_some();
                    let req = SelectRequest { ctx: ctx!(&rendered), allowed: &general, must_invoke: true, correction: correction.as_deref() };
                    let d = match driver.backend().select_tool(&req) {
                        Ok(d) => d,
                        Err(e) => return Err(abort(trace, e.to_string(), started)),
                    };
                    let source = driver.source();
                    let rejected = reject_reason(&d, &general, true);
                    trace.decision_log.push(DecisionRecord { step: state.step, source, retry, decision: d.clone(), rejected: rejected.clone() });
                    match rejected {
                        None => break d,
                        Some(r) if source == DecisionSource::Fallback => {
                            return Err(abort(trace, format!("fallback planner made an invalid decision: {r}"), started));
                        }
                        Some(r) if !retry => correction = Some(format!("Your last decision was rejected: {r}.")),
                        Some(_) => {
                            trace.protocol_violations += 1;
                            driver.fallback = Some(HeuristicPlanner::new());
                            correction = None;
                        }
                    }
                }
            }
        };
        let name = decision.tool_name.clone().unwrap_or_default();
        let card = registry.card(&name).expect("validated against the general set");
        run_step(
            &mut trace,
            &mut state,
            &mut history,
            &mut ordinals,
            registry,
            card,
            &decision,
            ToolCategory::General,
            vec![ToolCategory::General],
            video,
            qa,
            seed,
        );
    }

    let rendered = state.dict.render_context(config.context_budget);
    let answered = driver.backend().generate_answer(&ctx!(&rendered));
    trace.answer_source = driver.source();
    let raw = match answered {
        Ok(r) => r,
        Err(PlannerError::AnswerParse { raw }) => raw,
        Err(e) => return Err(abort(trace, e.to_string(), started)),
    };
    match parse_answer(&raw, &qa.options) {
        Ok(i) => {
            trace.final_answer = Some(i);
            trace.correct = i == qa.correct_index;
        }
        Err(e) => trace.error = Some(e.to_string()),
    }
    trace.raw_answer = Some(raw);
    trace.exit = exit;
    trace.final_keys = state.dict.keys().collect();
    trace.roi_covered = covers_roi(video, qa, &state.dict);
    trace.shortcut = detect_shortcut(&trace, config);
    state.finished = true;
    trace.wall_time_ms = started.elapsed().as_secs_f64() * 1000.0;
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn run_step(
    trace: &mut EpisodeTrace,
    state: &mut EpisodeState,
    history: &mut Vec<Observation>,
    ordinals: &mut BTreeMap<String, u32>,
    registry: &ToolRegistry,
    card: &ToolCard,
    decision: &PlannerDecision,
    effective: ToolCategory,
    allowed_categories: Vec<ToolCategory>,
    video: &SyntheticVideo,
    qa: &QAInstance,
    seed: &EpisodeSeed,
) {
    let args = decision.args();
    let ordinal = ordinals.entry(card.name.clone()).or_default();
    let stream = StreamKey::new(seed.global_seed, &seed.episode_id, &card.name, *ordinal);
    *ordinal += 1;
    let t0 = Instant::now();
    let (outcome, touched) = execute(registry, card, &args, video, qa, &mut state.dict, &stream, state.step);
    let wall = t0.elapsed().as_secs_f64() * 1000.0;
    let mut step = TraceStep {
        step: state.step,
        allowed_categories,
        tool_name: card.name.clone(),
        effective_category: effective,
        args_digest: digest(&args),
        args: args.clone(),
        result_digest: None,
        effect: "none".into(),
        keys_added: Vec::new(),
        keys_removed: Vec::new(),
        annotations_added: 0,
        frames_touched: touched,
        error: None,
        wall_time_ms: wall,
    };
    let mut obs = Observation { step: state.step, tool: card.name.clone(), category: effective, args, payload: None, error: None };
    match outcome {
        Ok((result, added, removed, notes)) => {
            step.result_digest = Some(digest(&serde_json::to_value(&result).unwrap_or(Value::Null)));
            step.effect = result.dictionary_effect.label().to_string();
            step.keys_added = added;
            step.keys_removed = removed;
            step.annotations_added = notes;
            obs.payload = Some(result.payload);
        }
        Err(e) => {
            step.error = Some(e.to_string());
            obs.error = Some(e.to_string());
        }
    }
    trace.steps.push(step);
    history.push(obs);
    state.record(effective);
    state.step += 1;
}
