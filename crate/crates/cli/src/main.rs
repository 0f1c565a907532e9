use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use star_core::config::BenchConfig;
use star_core::generate::GenerationProfile;
use star_core::metrics::{render_table, RunReport};
use star_core::registry::ToolRegistry;
use star_core::runner::{ablate, build_registry, run_strategy, PlannerSpec, RunError};
use star_core::scheduler::Strategy;
use star_core::suite::{load_profile, Suite};
use star_core::trace::{read_trace, write_trace, EpisodeExit};

const EXIT_USAGE: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "star-bench", version, about = "Synthetic video QA benchmark for tool-orchestration strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a suite of synthetic videos and questions.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short = 'n', default_value_t = 500)]
        n: usize,
        /// Generation profile (TOML or JSON).
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Run one or more strategies over a suite; writes traces and reports.
    Run {
        #[command(flatten)]
        common: Common,
        /// Strategy names, comma separated, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "star")]
        strategy: Vec<String>,
        #[arg(long, short = 'o')]
        out_dir: PathBuf,
    },
    /// Compare STAR with and without some tools.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Rebuild reports from trace files.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Print the bundled tool cards as JSON.
    Cards,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    suite: PathBuf,
    /// heuristic, remote, or scripted:<file>
    #[arg(long, default_value = "heuristic")]
    planner: String,
    /// Seed of every tool's random stream (overrides noise.seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Remove a tool card (repeatable).
    #[arg(long = "disable-tool")]
    disable_tool: Vec<String>,
    #[arg(long)]
    max_iterations: Option<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise override such as `p_miss=0.2` (repeatable).
    #[arg(long = "noise", value_name = "KEY=VALUE")]
    noise: Vec<String>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_USAGE, error: error.into() }
}

fn backend(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_BACKEND, error: error.into() }
}

fn registry_failure(e: RunError) -> Failure {
    match e {
        RunError::Registry(_) => usage(e),
        RunError::Handshake(_) => backend(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("star-bench: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate { seed, n, profile, out } => generate(seed, n, profile.as_deref(), &out),
        Command::Run { common, strategy, out_dir } => run(&common, &strategy, &out_dir),
        Command::Ablate { common, out } => ablation(&common, out.as_deref()),
        Command::Report { traces, config, json } => report(&traces, config.as_deref(), json),
        Command::Cards => {
            println!("{}", ToolRegistry::default_cards().to_json());
            Ok(())
        }
    }
}

fn generate(seed: u64, n: usize, profile: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let profile = match profile {
        Some(p) => load_profile(p).map_err(usage)?,
        None => GenerationProfile::default(),
    };
    let suite = Suite::generate(seed, n, &profile).map_err(usage)?;
    suite.save(out).with_context(|| format!("writing {}", out.display())).map_err(usage)?;
    println!("wrote {} questions to {}", suite.questions.len(), out.display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<BenchConfig, Failure> {
    match path {
        Some(p) => BenchConfig::load(p).map_err(usage),
        None => Ok(BenchConfig::default()),
    }
}

/// Applies `key=value` pairs to the `[noise]` table of the config.
fn apply_noise(cfg: &mut BenchConfig, pairs: &[String]) -> Result<(), Failure> {
    if pairs.is_empty() {
        return Ok(());
    }
    let mut table: toml::Table = toml::from_str(&cfg.to_toml()).map_err(usage)?;
    let noise = table.entry("noise").or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for pair in pairs {
        let (k, v) = pair.split_once('=').ok_or_else(|| usage(anyhow!("--noise expects KEY=VALUE, got `{pair}`")))?;
        let parsed: toml::Table =
            toml::from_str(&format!("v = {}", v.trim())).map_err(|_| usage(anyhow!("bad value in `{pair}`")))?;
        if let Some(t) = noise.as_table_mut() {
            t.insert(k.trim().to_string(), parsed["v"].clone());
        }
    }
    *cfg = BenchConfig::from_toml(&toml::to_string(&table).map_err(usage)?, "--noise").map_err(usage)?;
    Ok(())
}

struct Prepared {
    suite: Suite,
    config: BenchConfig,
    registry: ToolRegistry,
    planner: PlannerSpec,
}

fn prepare(c: &Common, disable_in_registry: bool) -> Result<Prepared, Failure> {
    let mut config = load_config(c.config.as_deref())?;
    apply_noise(&mut config, &c.noise)?;
    if let Some(s) = c.seed {
        config.noise.seed = s;
    }
    if let Some(i) = c.max_iterations {
        config.scheduler.max_iterations = i;
    }
    if disable_in_registry {
        config.tools.disabled.extend(c.disable_tool.iter().cloned());
    }
    config.validate().map_err(usage)?;
    let planner = PlannerSpec::parse(&c.planner).map_err(|e| usage(anyhow!(e)))?;
    let suite = Suite::load(&c.suite).map_err(usage)?;
    let registry = build_registry(&config).map_err(registry_failure)?;
    Ok(Prepared { suite, config, registry, planner })
}

fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>, Failure> {
    if names.iter().any(|n| n == "all") {
        return Ok(Strategy::ALL.to_vec());
    }
    names.iter().map(|n| n.parse::<Strategy>().map_err(|e| usage(anyhow!(e)))).collect()
}

fn run(c: &Common, strategies: &[String], out_dir: &Path) -> Result<(), Failure> {
    let strategies = parse_strategies(strategies)?;
    let p = prepare(c, true)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(usage)?;
    let mut reports = Vec::new();
    for s in strategies {
        let r = run_strategy(&p.suite, &p.registry, &p.planner, &p.config, s, c.workers);
        let trace_path = out_dir.join(format!("{}.jsonl", s.as_str()));
        write_trace(&trace_path, &r.traces).with_context(|| format!("writing {}", trace_path.display())).map_err(usage)?;
        let report_path = out_dir.join(format!("{}.report.json", s.as_str()));
        fs::write(&report_path, r.report.to_json()).with_context(|| format!("writing {}", report_path.display())).map_err(usage)?;
        if r.report.episodes > 0 && r.traces.iter().all(|t| t.exit == EpisodeExit::Aborted) {
            return Err(backend(anyhow!("every {} episode aborted: {}", s, r.traces[0].error.clone().unwrap_or_default())));
        }
        reports.push(r.report);
    }
    print!("{}", render_table(&reports));
    Ok(())
}

fn ablation(c: &Common, out: Option<&Path>) -> Result<(), Failure> {
    if c.disable_tool.is_empty() {
        return Err(usage(anyhow!("ablate needs at least one --disable-tool")));
    }
    let p = prepare(c, false)?;
    let report = ablate(&p.suite, &p.registry, &p.planner, &p.config, &c.disable_tool, c.workers).map_err(registry_failure)?;
    print!("{}", render_table(&[report.baseline.clone(), report.ablated.clone()]));
    println!(
        "disabled {}: accuracy drop {:.2} points, frames increase {:.2}",
        c.disable_tool.join(","),
        report.accuracy_drop,
        report.frames_increase
    );
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&report).map_err(usage)?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(usage)?;
    }
    Ok(())
}

fn report(paths: &[PathBuf], config: Option<&Path>, json: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let registry = ToolRegistry::default_cards().without(&cfg.tools.disabled).map_err(usage)?;
    let mut by_strategy: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for p in paths {
        let traces = read_trace(p).with_context(|| format!("reading {}", p.display())).map_err(usage)?;
        for t in traces {
            by_strategy.entry(t.strategy.clone()).or_default().push(t);
        }
    }
    let reports: Vec<RunReport> = by_strategy.iter().map(|(s, t)| RunReport::from_traces(s, t, &registry)).collect();
    if json {
        println!("{}", serde_json::to_string_pretty(&reports).map_err(usage)?);
    } else {
        print!("{}", render_table(&reports));
    }
    Ok(())
}
