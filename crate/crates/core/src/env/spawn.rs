//! Poisson task arrivals and the scenario presets that reshape them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::EnvConfig;
use crate::error::{Error, Result};
use crate::task::{Task, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Balanced,
    DelaySensitive,
    ComputeIntensive,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Balanced,
        Scenario::DelaySensitive,
        Scenario::ComputeIntensive,
    ];

    pub fn preset(self) -> ScenarioPreset {
        match self {
            Scenario::Balanced => ScenarioPreset {
                delay_sensitive_fraction: 0.0,
                delay_weight_scale: 1.0,
                workload_scale: 1.0,
            },
            Scenario::DelaySensitive => ScenarioPreset {
                delay_sensitive_fraction: 0.3,
                delay_weight_scale: 2.0,
                workload_scale: 1.0,
            },
            Scenario::ComputeIntensive => ScenarioPreset {
                delay_sensitive_fraction: 0.0,
                delay_weight_scale: 0.5,
                workload_scale: 1.5,
            },
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Balanced => "balanced",
            Scenario::DelaySensitive => "delay",
            Scenario::ComputeIntensive => "compute",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Scenario::Balanced),
            "delay" | "delay_sensitive" => Ok(Scenario::DelaySensitive),
            "compute" | "compute_intensive" => Ok(Scenario::ComputeIntensive),
            other => Err(Error::config("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPreset {
    /// Probability that a task draws its deadline from the tight range
    /// instead of the regular one.
    pub delay_sensitive_fraction: f64,
    /// Multiplier on the profit delay sensitivity.
    pub delay_weight_scale: f64,
    /// Multiplier on the workload range.
    pub workload_scale: f64,
}

impl Default for ScenarioPreset {
    fn default() -> Self {
        Scenario::Balanced.preset()
    }
}

impl ScenarioPreset {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delay_sensitive_fraction) {
            return Err(Error::config(
                "scenario.delay_sensitive_fraction",
                "must lie in [0, 1]",
            ));
        }
        if !(self.delay_weight_scale > 0.0) {
            return Err(Error::config("scenario.delay_weight_scale", "must be positive"));
        }
        if !(self.workload_scale > 0.0) {
            return Err(Error::config("scenario.workload_scale", "must be positive"));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws one slot's arrivals. Ids continue from `next_id`.
///
/// Sizes come in Mbit, workloads in Mcycles and deadlines in ms; the
/// returned tasks are in SI units.
pub fn spawn_tasks<R: Rng + ?Sized>(
    slot: u64,
    rng: &mut R,
    cfg: &EnvConfig,
    scenario: &ScenarioPreset,
    next_id: &mut TaskId,
) -> Vec<Task> {
    let mean = cfg.arrival_rate * cfg.slot_seconds;
    let count = if mean > 0.0 && cfg.n_uavs > 0 {
        Poisson::new(mean).expect("mean checked positive").sample(rng) as usize
    } else {
        0
    };
    let [wl_lo, wl_hi] = cfg.workload_range;
    let workload_range = [wl_lo * scenario.workload_scale, wl_hi * scenario.workload_scale];
    (0..count)
        .map(|_| {
            let origin_uav = rng.random_range(0..cfg.n_uavs);
            let data_bits = uniform(rng, cfg.task_size_range) * 1e6;
            let workload = uniform(rng, workload_range) * 1e6;
            let tight = rng.random::<f64>() < scenario.delay_sensitive_fraction;
            let deadline_ms = if tight {
                uniform(rng, [0.0, cfg.tight_deadline])
            } else {
                uniform(rng, cfg.deadline_range)
            };
            let id = *next_id;
            *next_id += 1;
            Task {
                id,
                origin_uav,
                data_bits,
                cycles_per_bit: workload / data_bits,
                deadline: deadline_ms * 1e-3,
                arrival_slot: slot,
            }
        })
        .collect()
}
