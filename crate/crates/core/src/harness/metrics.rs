//! Per-slot metrics and the run totals derived from them.
//!
//! `metrics.csv` columns, in order:
//!
//! | column | unit |
//! |---|---|
//! | episode, slot | index |
//! | reward | profit earned in the slot (cycles, discounted) |
//! | cumulative_profit | profit since the episode started |
//! | completion_rate | on-time completions / spawned tasks, episode so far |
//! | jain_index | fairness of completed cycles over all devices, episode so far |
//! | cluster_count | decision-making groups during the slot |
//! | critic_loss, actor_objective | training-cycle values, empty when none ran |

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::driver::SlotInfo;
use crate::env::{queue_index, EpisodeTrace};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "episode,slot,reward,cumulative_profit,completion_rate,jain_index,cluster_count,critic_loss,actor_objective";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub slot: u64,
    pub reward: f64,
    pub cumulative_profit: f64,
    pub completion_rate: f64,
    pub jain_index: f64,
    pub cluster_count: usize,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn write_csv(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.slot,
            self.reward,
            self.cumulative_profit,
            self.completion_rate,
            self.jain_index,
            self.cluster_count,
            opt(self.critic_loss),
            opt(self.actor_objective)
        );
    }
}

/// `(Σu)² / (n Σu²)`; 1 when nothing was used.
pub fn jain_index(usage: &[f64]) -> f64 {
    let sum: f64 = usage.iter().sum();
    let sq: f64 = usage.iter().map(|u| u * u).sum();
    if sq == 0.0 {
        1.0
    } else {
        sum * sum / (usage.len() as f64 * sq)
    }
}

/// One row per slot of an episode. `slots` carries the controller's view
/// of each slot and may be shorter than the trace (missing entries read as
/// empty).
pub fn compute_metrics(trace: &EpisodeTrace, episode: u64, slots: &[SlotInfo]) -> Vec<MetricsRow> {
    let n_slots = trace.rewards.len();
    let mut on_time = vec![0usize; n_slots];
    let mut cycles: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_slots];
    for r in &trace.resolutions {
        let s = r.slot as usize;
        if s >= n_slots {
            continue;
        }
        if r.on_time() {
            on_time[s] += 1;
        }
        if r.violation.is_none() {
            let q = queue_index(r.device, r.task.origin_uav, trace.n_uavs, trace.n_bs);
            cycles[s].push((q, r.task.workload()));
        }
    }
    let mut usage = vec![0.0; trace.n_uavs + trace.n_bs + 1];
    let (mut profit, mut spawned, mut done) = (0.0, 0usize, 0usize);
    (0..n_slots)
        .map(|s| {
            profit += trace.rewards[s];
            spawned += trace.spawned.get(s).copied().unwrap_or(0);
            done += on_time[s];
            for &(q, c) in &cycles[s] {
                usage[q] += c;
            }
            let info = slots.get(s).copied().unwrap_or_default();
            MetricsRow {
                episode,
                slot: s as u64,
                reward: trace.rewards[s],
                cumulative_profit: profit,
                completion_rate: if spawned == 0 { 0.0 } else { done as f64 / spawned as f64 },
                jain_index: jain_index(&usage),
                cluster_count: info.cluster_count,
                critic_loss: info.critic_loss,
                actor_objective: info.actor_objective,
            }
        })
        .collect()
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => return Err(Error::InvalidInput("metrics header missing or changed".into())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let bad = || Error::InvalidInput(format!("metrics line {}: `{line}`", n + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        rows.push(MetricsRow {
            episode: f[0].parse().map_err(|_| bad())?,
            slot: f[1].parse().map_err(|_| bad())?,
            reward: num(f[2])?,
            cumulative_profit: num(f[3])?,
            completion_rate: num(f[4])?,
            jain_index: num(f[5])?,
            cluster_count: f[6].parse().map_err(|_| bad())?,
            critic_loss: maybe(f[7])?,
            actor_objective: maybe(f[8])?,
        });
    }
    Ok(rows)
}

/// Trailing moving average; the first entries average what is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..xs.len())
        .map(|i| {
            let span = &xs[(i + 1).saturating_sub(w)..=i];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// First episode whose moving average reaches 95% of the last one.
pub fn convergence_episode(profits: &[f64], window: usize) -> Option<u64> {
    let ma = moving_average(profits, window);
    let last = *ma.last()?;
    ma.iter().position(|&m| m >= 0.95 * last).map(|i| i as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub episodes: u64,
    /// Episodes actually averaged (the configured window, capped).
    pub final_window: usize,
    pub mean_final_profit: f64,
    /// Mean end-of-episode completion rate over the final window.
    pub completion_rate: f64,
    pub convergence_episode: Option<u64>,
}

impl RunTotals {
    /// Totals from the last row of every episode.
    pub fn from_rows(rows: &[MetricsRow], final_window: usize, convergence_window: usize) -> Self {
        let mut ends: Vec<&MetricsRow> = Vec::new();
        for r in rows {
            match ends.last_mut() {
                Some(last) if last.episode == r.episode => *last = r,
                _ => ends.push(r),
            }
        }
        let profits: Vec<f64> = ends.iter().map(|r| r.cumulative_profit).collect();
        let w = final_window.min(ends.len());
        let tail = &ends[ends.len() - w..];
        let mean = |f: fn(&MetricsRow) -> f64| {
            if w == 0 {
                0.0
            } else {
                tail.iter().map(|r| f(r)).sum::<f64>() / w as f64
            }
        };
        Self {
            episodes: ends.len() as u64,
            final_window: w,
            mean_final_profit: mean(|r| r.cumulative_profit),
            completion_rate: mean(|r| r.completion_rate),
            convergence_episode: convergence_episode(&profits, convergence_window),
        }
    }
}
