//! Random episode traces for format tests.

use proptest::prelude::*;
use serde_json::{json, Value};
use star_core::planner::PlannerDecision;
use star_core::registry::ToolCategory;
use star_core::trace::{digest, DecisionRecord, DecisionSource, EpisodeExit, EpisodeTrace, SufficiencyRecord, TraceStep};

fn category() -> impl Strategy<Value = ToolCategory> {
    prop_oneof![
        Just(ToolCategory::Temporal),
        Just(ToolCategory::Spatial),
        Just(ToolCategory::Both),
        Just(ToolCategory::General)
    ]
}

fn source() -> impl Strategy<Value = DecisionSource> {
    prop_oneof![Just(DecisionSource::Primary), Just(DecisionSource::Fallback)]
}

fn args() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(json!({})),
        "[a-z \"\\\\\n]{0,12}".prop_map(|q| json!({"query": q})),
        (0usize..500, 0usize..500).prop_map(|(a, b)| json!({"span": [a, b]})),
        prop::collection::vec(0usize..500, 0..5).prop_map(|f| json!({"frames": f, "x": 0.1 + f.len() as f64 / 3.0})),
    ]
}

fn step() -> impl Strategy<Value = TraceStep> {
    let head = (
        0u32..20,
        prop::collection::vec(category(), 1..4),
        "[a-z_]{3,20}",
        category(),
        args(),
        prop::option::of("[0-9a-f]{16}"),
        prop_oneof![Just("temporal_update"), Just("annotation"), Just("none")],
    );
    let rest = (
        prop::collection::vec(0usize..1000, 0..6),
        prop::collection::vec(0usize..1000, 0..6),
        0usize..20,
        prop::collection::vec(0usize..1000, 0..10),
        prop::option::of("[ -~]{0,30}"),
        0.0f64..1e4,
    );
    (head, rest)
        .prop_map(|((step, allowed, tool, eff, args, result_digest, effect), (add, rem, notes, touched, error, ms))| TraceStep {
            step,
            allowed_categories: allowed,
            tool_name: tool,
            effective_category: eff,
            args_digest: digest(&args),
            args,
            result_digest,
            effect: effect.to_string(),
            keys_added: add,
            keys_removed: rem,
            annotations_added: notes,
            frames_touched: touched,
            error,
            wall_time_ms: ms,
        })
}

fn decision() -> impl Strategy<Value = DecisionRecord> {
    (0u32..20, source(), any::<bool>(), prop::option::of("[a-z_]{3,12}"), args(), "[ -~]{0,20}", prop::option::of("[ -~]{0,20}"))
        .prop_map(|(step, source, retry, tool, a, why, rejected)| DecisionRecord {
            step,
            source,
            retry,
            decision: match tool {
                Some(t) => PlannerDecision::invoke(&t, a, why),
                None => PlannerDecision::sufficient(why),
            },
            rejected,
        })
}

pub fn trace() -> impl Strategy<Value = EpisodeTrace> {
    let ids = ("[a-z0-9-]{1,12}", "[a-z0-9-]{1,12}", "[a-z_]{3,12}", "[a-z-]{3,12}", "[a-z]{3,10}", 1usize..5000);
    let body = (
        prop::collection::vec(0usize..5000, 0..16),
        prop::collection::vec(step(), 0..8),
        prop::collection::vec(decision(), 0..8),
        prop::collection::vec((0u32..20, source(), any::<bool>()), 0..5),
        source(),
        prop::option::of("[ -~]{0,20}"),
        prop::option::of(0usize..5),
    );
    let tail = (
        any::<bool>(),
        any::<bool>(),
        prop_oneof![Just(EpisodeExit::Sufficient), Just(EpisodeExit::IterationCap), Just(EpisodeExit::Aborted)],
        0u32..3,
        prop::option::of("[ -~]{0,20}"),
        prop::collection::vec(0usize..5000, 1..16),
        any::<bool>(),
        0.0f64..1e5,
    );
    (ids, body, tail).prop_map(
        |((e, q, kind, strat, planner, n), (init, steps, decisions, suff, src, raw, fin), (correct, shortcut, exit, pv, err, keys, roi, ms))| {
            EpisodeTrace {
                episode_id: e,
                question_id: q,
                video_id: "v".into(),
                question_kind: kind,
                strategy: strat,
                planner,
                frame_count: n,
                initial_keys: init,
                steps,
                decision_log: decisions,
                sufficiency_log: suff.into_iter().map(|(step, source, sufficient)| SufficiencyRecord { step, source, sufficient }).collect(),
                answer_source: src,
                raw_answer: raw,
                final_answer: fin,
                correct,
                shortcut,
                exit,
                protocol_violations: pv,
                error: err,
                final_keys: keys,
                roi_covered: roi,
                wall_time_ms: ms,
            }
        },
    )
}

/// Malformed inputs and the line each must be reported at.
pub fn malformed_fixtures(valid: &str) -> Vec<(String, &'static str, usize)> {
    let lines: Vec<&str> = valid.lines().collect();
    let header = lines[0];
    let step = lines[1];
    vec![
        ("not json\n".to_string(), "garbage", 1),
        (format!("{header}\n{{\"type\":\"step\"\n"), "truncated step", 2),
        (format!("{header}\n"), "missing step", 2),
        (format!("{step}\n"), "step before header", 1),
        (format!("{header}\n{step}\n[1,2]\n"), "array line", 3),
        (format!("{header}\n{step}\n{{\"type\":\"weird\"}}\n"), "unknown type", 3),
        (format!("{header}\n{step}\n\n{{\"step_count\":0}}\n"), "untyped line after blank", 4),
        (format!("{header}\n{}\n", step.replace("\"tool_name\"", "\"tool\"")), "renamed field", 2),
        (format!("{}\n{step}\n", header.replace("\"step_count\":1", "\"step_count\":\"one\"")), "bad step count", 1),
    ]
}
