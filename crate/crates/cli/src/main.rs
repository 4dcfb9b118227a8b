use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sagin_sched::baselines::Algorithm;
use sagin_sched::env::Scenario;
use sagin_sched::harness::{load_config_from, parse_override, run_experiment, RunConfig, RunSummary};
use sagin_sched::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algo {
    Cmaddpg,
    Maddpg,
    Maac,
    Greedy,
    Random,
    Local,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Cmaddpg => Algorithm::Cmaddpg,
            Algo::Maddpg => Algorithm::Maddpg,
            Algo::Maac => Algorithm::Maac,
            Algo::Greedy => Algorithm::Greedy,
            Algo::Random => Algorithm::Random,
            Algo::Local => Algorithm::Local,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Balanced,
    Delay,
    Compute,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Balanced => Scenario::Balanced,
            ScenarioArg::Delay => Scenario::DelaySensitive,
            ScenarioArg::Compute => Scenario::ComputeIntensive,
        }
    }
}

/// Runs a task-scheduling experiment and writes metrics.csv, run.json,
/// clusters.log and checkpoints/ to the output directory.
#[derive(Debug, Parser)]
#[command(name = "sagin", version)]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Run seed. Without it, the config's seed list is used.
    #[arg(long, env = "SAGIN_SCHED_SEED")]
    seed: Option<u64>,

    #[arg(long, value_enum)]
    algo: Option<Algo>,

    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,

    #[arg(long)]
    episodes: Option<u64>,

    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,

    /// Start from the 12-UAV desk preset instead of the full grid.
    #[arg(long)]
    desk: bool,

    /// Turn shadowing off.
    #[arg(long)]
    deterministic_channel: bool,

    /// Also write the last episode's per-task outcomes to trace.csv.
    #[arg(long)]
    trace: bool,

    /// Extra `key.path=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 3,
        "input" => 4,
        "io" => 5,
        "contract" => 6,
        "numeric" => 7,
        "checkpoint" => 8,
        _ => 9,
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let base = if cli.desk { RunConfig::desk() } else { RunConfig::default() };
    let mut overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    let mut flag = |key: &str, text: String| -> Result<()> {
        overrides.push(parse_override(&format!("{key}={text}"))?);
        Ok(())
    };
    if let Some(a) = cli.algo {
        flag("algorithm", format!("\"{}\"", Algorithm::from(a)))?;
    }
    if let Some(s) = cli.scenario {
        let name = match Scenario::from(s) {
            Scenario::Balanced => "balanced",
            Scenario::DelaySensitive => "delay_sensitive",
            Scenario::ComputeIntensive => "compute_intensive",
        };
        flag("scenario", format!("\"{name}\""))?;
    }
    if let Some(n) = cli.episodes {
        flag("episodes", n.to_string())?;
    }
    if cli.deterministic_channel {
        flag("env.deterministic_channel", "true".into())?;
    }
    if cli.trace {
        flag("write_trace", "true".into())?;
    }
    load_config_from(base, cli.config.as_deref(), &overrides)
}

fn report(s: &RunSummary) {
    let conv = s
        .totals
        .convergence_episode
        .map_or_else(|| "-".to_string(), |e| e.to_string());
    println!(
        "{} {} seed {}: final profit {:.6e}, completion {:.4}, converged at {}, agents {}, {:.1}s",
        s.algorithm,
        s.scenario,
        s.seed,
        s.totals.mean_final_profit,
        s.totals.completion_rate,
        conv,
        s.agent_count,
        s.wall_seconds
    );
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    match cli.seed {
        Some(seed) => report(&run_experiment(&cfg, seed, &cli.out)?),
        None if cfg.seeds.len() == 1 => report(&run_experiment(&cfg, cfg.seeds[0], &cli.out)?),
        None => {
            for &seed in &cfg.seeds {
                report(&run_experiment(&cfg, seed, &cli.out.join(format!("seed-{seed}")))?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
