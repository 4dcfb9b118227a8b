//! Experiment runner: configuration, per-slot metrics and run artifacts.
//!
//! A run directory holds `metrics.csv` (one row per slot), `run.json`
//! (config echo and totals), `clusters.log`, `checkpoints/` with one file
//! pair per network plus `manifest.json`, and optionally `trace.csv` with
//! the last episode's per-task outcomes.

mod metrics;
mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::Algorithm;
use crate::clustering::ClusterConfig;
use crate::env::{EnvConfig, Scenario};
use crate::error::{Error, Result};
use crate::marl::TrainConfig;

pub use metrics::{
    compute_metrics, convergence_episode, jain_index, moving_average, parse_metrics, MetricsRow, RunTotals,
    METRICS_HEADER,
};
pub use run::{execute, run_experiment, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub scenario: Scenario,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    /// Episodes averaged for the reported final profit.
    pub final_window: usize,
    /// Moving-average window of the convergence test.
    pub convergence_window: usize,
    pub checkpoints: bool,
    /// Also write the last episode's per-task outcomes.
    pub write_trace: bool,
    pub env: EnvConfig,
    pub clustering: ClusterConfig,
    pub training: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cmaddpg,
            scenario: Scenario::Balanced,
            episodes: 300,
            seeds: vec![1],
            final_window: 100,
            convergence_window: 50,
            checkpoints: true,
            write_trace: false,
            env: EnvConfig::default(),
            clustering: ClusterConfig::default(),
            training: TrainConfig::default(),
        }
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { key, msg } => Error::Config {
            key: format!("{prefix}.{key}"),
            msg,
        },
        other => other,
    }
}

impl RunConfig {
    /// A quarter-side area with 12 UAVs and 6 base stations. The UAV radio
    /// range and base-station coverage shrink with the area so clustering
    /// still yields several heads.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.env.area_side = 1250.0;
        cfg.env.n_uavs = 12;
        cfg.env.n_bs = 6;
        cfg.env.bs_coverage_radius = 600.0;
        cfg.clustering.comm_radius = 500.0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.final_window == 0 {
            return Err(Error::config("final_window", "must be at least 1"));
        }
        if self.convergence_window == 0 {
            return Err(Error::config("convergence_window", "must be at least 1"));
        }
        self.env.validate().map_err(|e| prefixed("env", e))?;
        self.clustering.validate()?;
        self.training.validate()?;
        self.scenario.preset().validate()
    }
}

/// Parses a dotted override such as `env.n_uavs=12`. The value is read
/// as TOML, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidInput(format!("override `{text}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::InvalidInput(format!("override `{text}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut t = table;
    for (i, p) in parts.iter().enumerate() {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(parts[..=i].join("."), "is not a table"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Layers `path` (if any) and then `overrides` on top of `base`, rejecting
/// unknown keys, and validates the result.
pub fn load_config_from(base: RunConfig, path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<RunConfig> {
    let mut table = toml::Table::try_from(&base).map_err(|e| Error::InvalidInput(format!("config echo: {e}")))?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: toml::Table = toml::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), format!("parse error: {}", e.message())))?;
        merge(&mut table, file);
    }
    for (k, v) in overrides {
        set_path(&mut table, k, v.clone())?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let key = e.path().to_string();
        Error::config(key, e.into_inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// [`load_config_from`] starting from the full-scale defaults.
pub fn load_config(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<RunConfig> {
    load_config_from(RunConfig::default(), path, overrides)
}
