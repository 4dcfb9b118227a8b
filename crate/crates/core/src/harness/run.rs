use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsRow, RunTotals, METRICS_HEADER};
use super::RunConfig;
use crate::baselines::{build_controller, Algorithm};
use crate::driver::{run_episodes, Controller, EpisodeLog};
use crate::env::{write_trace, Env, Scenario};
use crate::error::{Error, Result};
use crate::nn::{save_checkpoint, CHECKPOINT_VERSION};

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub scenario: Scenario,
    pub seed: u64,
    pub config: RunConfig,
    pub totals: RunTotals,
    pub agent_count: usize,
    /// Mean seconds per episode spent in training cycles.
    pub train_seconds_per_episode: f64,
    pub wall_seconds: f64,
}

/// Runs `cfg` with `seed`, handing every finished episode to `sink`
/// together with the controller that produced it.
pub fn execute(
    cfg: &RunConfig,
    seed: u64,
    sink: impl FnMut(EpisodeLog, &mut dyn Controller) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    let mut env = Env::new(cfg.env.clone(), cfg.scenario.preset(), seed)?;
    let mut ctl = build_controller(cfg.algorithm, &env, &cfg.clustering, &cfg.training, seed)?;
    run_episodes(&mut env, ctl.as_mut(), cfg.episodes, sink)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_all(w: &mut impl Write, path: &Path, text: &str) -> Result<()> {
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn save_networks(ctl: &dyn Controller, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (name, net) in ctl.networks() {
        let file = format!("{name}.bin");
        save_checkpoint(net, &dir.join(&file))?;
        entries.push(serde_json::json!({
            "name": name,
            "file": file,
            "descriptor": format!("{name}.desc"),
            "params": net.param_count(),
        }));
    }
    let manifest = serde_json::json!({
        "version": CHECKPOINT_VERSION,
        "algorithm": ctl.name(),
        "networks": entries,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("json value");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Runs one seed and writes the run directory `out`. On failure the
/// partial `metrics.csv` is kept and ends with a `# truncated:` line.
pub fn run_experiment(cfg: &RunConfig, seed: u64, out: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let metrics_path = out.join("metrics.csv");
    let clusters_path = out.join("clusters.log");
    let mut metrics = create(&metrics_path)?;
    let mut clusters = create(&clusters_path)?;
    write_all(&mut metrics, &metrics_path, &format!("{METRICS_HEADER}\n"))?;

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut agent_count = 0;
    let mut train_seconds = 0.0;
    let mut last_trace = None;
    let result = execute(cfg, seed, |log, ctl| {
        let episode_rows = compute_metrics(&log.trace, log.episode, &log.slots);
        let mut text = String::new();
        episode_rows.iter().for_each(|r| r.write_csv(&mut text));
        write_all(&mut metrics, &metrics_path, &text)?;
        metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
        write_all(&mut clusters, &clusters_path, &ctl.take_cluster_log())?;
        rows.extend(episode_rows);
        agent_count = log.agent_count;
        train_seconds += log.train_seconds;
        let last = log.episode + 1 == cfg.episodes;
        if last && cfg.checkpoints {
            save_networks(ctl, &out.join("checkpoints"))?;
        }
        if last && cfg.write_trace {
            last_trace = Some(log.trace);
        }
        Ok(())
    });
    if let Err(e) = result {
        let _ = writeln!(metrics, "# truncated: {e}");
        let _ = metrics.flush();
        return Err(e.context(format!("run of {} with seed {seed}", cfg.algorithm)));
    }
    metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
    clusters.flush().map_err(|e| Error::io(&clusters_path, e))?;
    if let Some(trace) = last_trace {
        let mut text = String::new();
        write_trace(&trace, &mut text);
        let path = out.join("trace.csv");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let summary = RunSummary {
        algorithm: cfg.algorithm,
        scenario: cfg.scenario,
        seed,
        config: cfg.clone(),
        totals: RunTotals::from_rows(&rows, cfg.final_window, cfg.convergence_window),
        agent_count,
        train_seconds_per_episode: if cfg.episodes == 0 {
            0.0
        } else {
            train_seconds / cfg.episodes as f64
        },
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out.join("run.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
