//! Trace-level checks of the scheduling laws.

use star_core::registry::{ToolCategory, ToolRegistry};
use star_core::trace::EpisodeTrace;

fn opposite(c: ToolCategory) -> ToolCategory {
    match c {
        ToolCategory::Temporal => ToolCategory::Spatial,
        _ => ToolCategory::Temporal,
    }
}

/// Each step's effective category must be one its card allows.
fn category_errors(t: &EpisodeTrace, reg: &ToolRegistry) -> Vec<String> {
    let mut out = Vec::new();
    for s in &t.steps {
        let Some(card) = reg.card(&s.tool_name) else {
            out.push(format!("step {}: unknown tool {}", s.step, s.tool_name));
            continue;
        };
        let ok = match card.category {
            ToolCategory::Both => matches!(s.effective_category, ToolCategory::Temporal | ToolCategory::Spatial),
            c => s.effective_category == c,
        };
        if !ok {
            out.push(format!("step {}: {} counted as {:?}", s.step, s.tool_name, s.effective_category));
        }
        if !s.allowed_categories.contains(&card.category) {
            out.push(format!("step {}: {} outside allowed {:?}", s.step, s.tool_name, s.allowed_categories));
        }
    }
    out
}

fn general_suffix_errors(t: &EpisodeTrace) -> Vec<String> {
    let mut seen_general = false;
    let mut out = Vec::new();
    for s in &t.steps {
        if s.effective_category == ToolCategory::General {
            seen_general = true;
        } else if seen_general {
            out.push(format!("step {}: {} after a general call", s.step, s.tool_name));
        }
    }
    out
}

/// Strict temporal/spatial alternation with general calls only at the end.
pub fn alternation_violations(t: &EpisodeTrace, reg: &ToolRegistry) -> Vec<String> {
    let mut out = category_errors(t, reg);
    out.extend(general_suffix_errors(t));
    let chain: Vec<ToolCategory> =
        t.steps.iter().map(|s| s.effective_category).filter(|c| *c != ToolCategory::General).collect();
    for w in chain.windows(2) {
        if w[1] != opposite(w[0]) {
            out.push(format!("{:?} followed by {:?}", w[0], w[1]));
        }
    }
    out
}

/// A temporal phase, then a spatial phase, then general calls.
pub fn disentangled_violations(t: &EpisodeTrace, reg: &ToolRegistry) -> Vec<String> {
    let mut out = category_errors(t, reg);
    out.extend(general_suffix_errors(t));
    let mut spatial = false;
    for s in &t.steps {
        match s.effective_category {
            ToolCategory::Spatial => spatial = true,
            ToolCategory::Temporal if spatial => out.push(format!("step {}: temporal call after the spatial phase began", s.step)),
            _ => {}
        }
    }
    out
}

pub fn non_general_calls(t: &EpisodeTrace) -> usize {
    t.steps.iter().filter(|s| s.effective_category != ToolCategory::General).count()
}
