//! Efficiency and diagnostic metrics over episode traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::FrameIndex;
use crate::registry::{ToolCategory, ToolRegistry};
use crate::trace::{EpisodeExit, EpisodeTrace};

/// Mean toolchain length the original STAR planner reached. Reference only.
pub const REFERENCE_STAR_TOOLCHAIN_LENGTH: f64 = 8.7;
/// Mean distinct tools per episode for the original STAR planner. Reference only.
pub const REFERENCE_STAR_DISTINCT_TOOLS: f64 = 6.3;

pub fn toolchain_length(trace: &EpisodeTrace) -> usize {
    trace.steps.len()
}

pub fn distinct_tools(trace: &EpisodeTrace) -> usize {
    trace.tool_names().collect::<BTreeSet<_>>().len()
}

/// Unique frames read: the initial sample plus every tool's touches.
pub fn frames_processed(trace: &EpisodeTrace) -> usize {
    let mut seen: BTreeSet<FrameIndex> = trace.initial_keys.iter().copied().collect();
    for s in &trace.steps {
        seen.extend(s.frames_touched.iter().copied());
    }
    seen.len()
}

/// Share of all invocations per tool, in percent.
pub fn usage_distribution<'a>(traces: impl IntoIterator<Item = &'a EpisodeTrace>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in traces {
        for name in t.tool_names() {
            *counts.entry(name.to_string()).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(k, c)| (k, if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 }))
        .collect()
}

/// Sample variance (n - 1 divisor); 0 for fewer than two values.
pub fn category_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Per-tool shares grouped by card category, every card of the category
/// listed (unused ones at 0).
pub fn shares_by_category(dist: &BTreeMap<String, f64>, registry: &ToolRegistry) -> BTreeMap<ToolCategory, Vec<(String, f64)>> {
    let mut out: BTreeMap<ToolCategory, Vec<(String, f64)>> = BTreeMap::new();
    for c in registry.cards() {
        out.entry(c.category).or_default().push((c.name.clone(), dist.get(&c.name).copied().unwrap_or(0.0)));
    }
    out
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub episodes: usize,
    pub aborted: usize,
    pub accuracy: f64,
    pub mean_frames: f64,
    pub mean_toolchain_length: f64,
    pub mean_distinct_tools: f64,
    pub usage_distribution: BTreeMap<String, f64>,
    /// Summed share per category, in percent.
    pub category_usage: BTreeMap<ToolCategory, f64>,
    pub per_category_variance: BTreeMap<ToolCategory, f64>,
    pub shortcut_rate: f64,
    pub roi_coverage_rate: f64,
    pub protocol_violations: u32,
    pub mean_wall_time_ms: f64,
}

impl RunReport {
    /// Aggregates traces of one strategy. Aborted episodes count as wrong
    /// and are otherwise included.
    pub fn from_traces(strategy: &str, traces: &[EpisodeTrace], registry: &ToolRegistry) -> Self {
        let n = traces.len();
        let dist = usage_distribution(traces);
        let by_cat = shares_by_category(&dist, registry);
        let category_usage = by_cat.iter().map(|(c, v)| (*c, v.iter().map(|(_, p)| p).sum())).collect();
        let per_category_variance = by_cat
            .iter()
            .map(|(c, v)| (*c, category_variance(&v.iter().map(|(_, p)| *p).collect::<Vec<_>>())))
            .collect();
        let rate = |f: &dyn Fn(&EpisodeTrace) -> bool| {
            if n == 0 {
                0.0
            } else {
                traces.iter().filter(|t| f(t)).count() as f64 / n as f64
            }
        };
        RunReport {
            strategy: strategy.to_string(),
            episodes: n,
            aborted: traces.iter().filter(|t| t.exit == EpisodeExit::Aborted).count(),
            accuracy: rate(&|t| t.correct),
            mean_frames: mean(traces.iter().map(|t| frames_processed(t) as f64)),
            mean_toolchain_length: mean(traces.iter().map(|t| toolchain_length(t) as f64)),
            mean_distinct_tools: mean(traces.iter().map(|t| distinct_tools(t) as f64)),
            usage_distribution: dist,
            category_usage,
            per_category_variance,
            shortcut_rate: rate(&|t| t.shortcut),
            roi_coverage_rate: rate(&|t| t.roi_covered),
            protocol_violations: traces.iter().map(|t| t.protocol_violations).sum(),
            mean_wall_time_ms: mean(traces.iter().map(|t| t.wall_time_ms)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Side-by-side table of several reports.
pub fn render_table(reports: &[RunReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>8} {:>9} {:>8} {:>8} {:>7} {:>9} {:>8}",
        "strategy", "episodes", "accuracy", "frames", "length", "tools", "shortcut", "aborted"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>8.1}% {:>8.1} {:>8.2} {:>7.2} {:>8.1}% {:>8}",
            r.strategy,
            r.episodes,
            100.0 * r.accuracy,
            r.mean_frames,
            r.mean_toolchain_length,
            r.mean_distinct_tools,
            100.0 * r.shortcut_rate,
            r.aborted
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub disabled: Vec<String>,
    pub baseline: RunReport,
    pub ablated: RunReport,
    /// Baseline minus ablated accuracy, in points.
    pub accuracy_drop: f64,
    /// Ablated minus baseline mean frames.
    pub frames_increase: f64,
}

impl AblationReport {
    pub fn new(disabled: Vec<String>, baseline: RunReport, ablated: RunReport) -> Self {
        Self {
            accuracy_drop: 100.0 * (baseline.accuracy - ablated.accuracy),
            frames_increase: ablated.mean_frames - baseline.mean_frames,
            disabled,
            baseline,
            ablated,
        }
    }
}
