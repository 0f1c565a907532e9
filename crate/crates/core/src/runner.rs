//! Parallel suite runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::BenchConfig;
use crate::metrics::{AblationReport, RunReport};
use crate::planner::scripted::Script;
use crate::planner::{HeuristicPlanner, PlannerBackend, RemoteChatPlanner, ScriptedPlanner};
use crate::protocol::{bind_remote, HandshakeError};
use crate::registry::{RegistryError, ToolRegistry};
use crate::scheduler::{run_episode, EpisodeAborted, EpisodeSeed, Strategy, StrategyConfig};
use crate::sim::bind_sim;
use crate::suite::Suite;
use crate::trace::EpisodeTrace;

/// How to build a planner for each episode.
#[derive(Debug, Clone)]
pub enum PlannerSpec {
    Heuristic,
    /// One script for every episode.
    Script(Script),
    /// Scripts keyed by question id.
    Scripts(BTreeMap<String, Script>),
    Remote { url: String, token: Option<String>, timeout: Duration },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    One(Script),
    Many(BTreeMap<String, Script>),
}

impl PlannerSpec {
    /// Parses `heuristic`, `remote` or `scripted:<file>`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        match spec {
            "heuristic" => Ok(PlannerSpec::Heuristic),
            "remote" => {
                let url = std::env::var(crate::planner::remote::URL_ENV)
                    .map_err(|_| format!("--planner remote needs {}", crate::planner::remote::URL_ENV))?;
                let token = std::env::var(crate::planner::remote::TOKEN_ENV).ok().filter(|t| !t.is_empty());
                Ok(PlannerSpec::Remote { url, token, timeout: Duration::from_secs(60) })
            }
            s => match s.strip_prefix("scripted:") {
                Some(path) => Self::load_scripts(Path::new(path)),
                None => Err(format!("unknown planner `{s}` (expected heuristic, remote or scripted:<file>)")),
            },
        }
    }

    pub fn load_scripts(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        match serde_json::from_str::<ScriptFile>(&text).map_err(|e| format!("{}: {e}", path.display()))? {
            ScriptFile::One(s) => Ok(PlannerSpec::Script(s)),
            ScriptFile::Many(m) => Ok(PlannerSpec::Scripts(m)),
        }
    }

    pub fn build(&self, question_id: &str) -> Box<dyn PlannerBackend> {
        match self {
            PlannerSpec::Heuristic => Box::new(HeuristicPlanner::new()),
            PlannerSpec::Script(s) => Box::new(ScriptedPlanner::new(s.clone())),
            PlannerSpec::Scripts(m) => Box::new(ScriptedPlanner::new(m.get(question_id).cloned().unwrap_or_default())),
            PlannerSpec::Remote { url, token, timeout } => Box::new(RemoteChatPlanner::new(url.clone(), token.clone(), *timeout)),
        }
    }
}

pub type EpisodeOutcome = Result<EpisodeTrace, EpisodeAborted>;

/// Runs every question of the suite. Results come back in suite order
/// whatever the worker count.
pub fn run_suite(
    suite: &Suite,
    registry: &ToolRegistry,
    planner: &PlannerSpec,
    config: &StrategyConfig,
    global_seed: u64,
    workers: usize,
) -> Vec<EpisodeOutcome> {
    let videos = suite.video_index();
    let run_one = |qa: &crate::model::QAInstance| -> EpisodeOutcome {
        let video = videos.get(qa.video_id.as_str()).expect("validated suite");
        let mut p = planner.build(&qa.question_id);
        let seed = EpisodeSeed { global_seed, episode_id: qa.question_id.clone() };
        run_episode(video, qa, registry, p.as_mut(), config, &seed)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| suite.questions.par_iter().map(run_one).collect()),
        Err(_) => suite.questions.iter().map(run_one).collect(),
    }
}

/// Traces of every outcome, aborted episodes included.
pub fn traces(outcomes: &[EpisodeOutcome]) -> Vec<EpisodeTrace> {
    outcomes
        .iter()
        .map(|o| match o {
            Ok(t) => t.clone(),
            Err(a) => (*a.trace).clone(),
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Handshake(#[from] HandshakeError),
}

/// The bundled cards bound to the simulators, then to the configured tool
/// server if any, minus the disabled cards. Sealed.
pub fn build_registry(config: &BenchConfig) -> Result<ToolRegistry, RunError> {
    let mut r = ToolRegistry::default_cards();
    bind_sim(&mut r, config.noise.clone())?;
    if let Some(endpoint) = &config.tools.remote_endpoint {
        bind_remote(&mut r, endpoint, config.tools.remote_timeout())?;
    }
    Ok(r.without(&config.tools.disabled)?.seal())
}

/// Traces and report of one strategy over a suite.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub traces: Vec<EpisodeTrace>,
    pub report: RunReport,
}

pub fn run_strategy(
    suite: &Suite,
    registry: &ToolRegistry,
    planner: &PlannerSpec,
    config: &BenchConfig,
    strategy: Strategy,
    workers: usize,
) -> StrategyRun {
    let sc = StrategyConfig { strategy, ..config.scheduler.clone() };
    let traces = traces(&run_suite(suite, registry, planner, &sc, config.noise.seed, workers));
    let report = RunReport::from_traces(strategy.as_str(), &traces, registry);
    StrategyRun { strategy, traces, report }
}

/// STAR with and without the named cards.
pub fn ablate(
    suite: &Suite,
    registry: &ToolRegistry,
    planner: &PlannerSpec,
    config: &BenchConfig,
    disabled: &[String],
    workers: usize,
) -> Result<AblationReport, RunError> {
    let reduced = registry.without(disabled)?;
    let base = run_strategy(suite, registry, planner, config, Strategy::StarInterleaved, workers);
    let cut = run_strategy(suite, &reduced, planner, config, Strategy::StarInterleaved, workers);
    Ok(AblationReport::new(disabled.to_vec(), base.report, cut.report))
}
