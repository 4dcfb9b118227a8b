//! Episode traces, the constraint auditor, and trace export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::queue::Resolution;
use crate::task::{task_profit, NodeId, ProfitParams, Task, TaskId};

/// One offloading decision as executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub slot: u64,
    pub task: Task,
    pub agent: NodeId,
    /// Indicator over `[local, bs1..bsN, satellite]`.
    pub alpha: Vec<u8>,
    pub priority: f64,
}

/// Cycles admitted to one device in one slot against its budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub slot: u64,
    /// Queue index in scheduler layout.
    pub queue: usize,
    pub admitted_cycles: f64,
    /// Capacity times slot length minus the backlog at slot start.
    pub budget_cycles: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub n_uavs: usize,
    pub n_bs: usize,
    pub profit: Option<ProfitParams>,
    /// Arrivals per slot.
    pub spawned: Vec<usize>,
    pub rewards: Vec<f64>,
    pub decisions: Vec<DecisionRecord>,
    pub resolutions: Vec<Resolution>,
    pub loads: Vec<LoadRecord>,
    /// Tasks still queued or in service when the episode ended.
    pub unfinished: usize,
}

impl EpisodeTrace {
    pub fn total_spawned(&self) -> usize {
        self.spawned.iter().sum()
    }

    pub fn on_time(&self) -> usize {
        self.resolutions.iter().filter(|r| r.on_time()).count()
    }

    pub fn violated(&self) -> usize {
        self.resolutions.len() - self.on_time()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tasks: usize,
    /// Tasks without exactly one destination, or decided more than once.
    pub c1_breaches: usize,
    /// Tasks that missed their deadline. Legal, just unprofitable.
    pub c2_misses: usize,
    /// Decision entries outside {0, 1}.
    pub c3_breaches: usize,
    /// Device-slots whose admitted cycles exceeded the rolling budget.
    /// Actions may over-commit a device; the excess waits in its queue.
    pub c4_overloads: usize,
    /// Completed tasks reported on time despite exceeding the deadline.
    pub late_completions: usize,
    /// On-time profit recomputed from the task parameters.
    pub on_time_profit: f64,
}

impl AuditReport {
    /// Breaches that can only come from a simulator bug.
    pub fn structural_breaches(&self) -> usize {
        self.c1_breaches + self.c3_breaches + self.late_completions
    }
}

pub fn audit_constraints(trace: &EpisodeTrace) -> AuditReport {
    let mut report = AuditReport::default();
    let mut decided: BTreeMap<TaskId, usize> = BTreeMap::new();
    for d in &trace.decisions {
        *decided.entry(d.task.id).or_default() += 1;
        if d.alpha.iter().any(|&a| a > 1) {
            report.c3_breaches += 1;
        }
        let chosen: u32 = d.alpha.iter().map(|&a| u32::from(a)).sum();
        if chosen != 1 {
            report.c1_breaches += 1;
        }
    }
    report.c1_breaches += decided.values().filter(|&&n| n > 1).count();
    report.tasks = decided.len();

    for r in &trace.resolutions {
        if !decided.contains_key(&r.task.id) {
            report.c1_breaches += 1;
        }
        if !r.on_time() {
            report.c2_misses += 1;
            continue;
        }
        if r.total > r.task.deadline {
            report.late_completions += 1;
            continue;
        }
        let params = trace.profit.unwrap_or_default();
        report.on_time_profit += task_profit(&r.task, &params);
    }
    report.c4_overloads = trace
        .loads
        .iter()
        .filter(|l| l.admitted_cycles > l.budget_cycles * (1.0 + 1e-12))
        .count();
    report
}

pub const TRACE_HEADER: &str =
    "slot,task_id,origin,device,priority,queueing_s,transmission_s,computing_s,total_s,profit,on_time,reason";

/// One line per resolved task, in resolution order.
pub fn write_trace(trace: &EpisodeTrace, out: &mut String) {
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.resolutions {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.task.id,
            r.task.origin_uav,
            r.device,
            r.priority,
            r.queueing,
            r.transmission,
            r.computing,
            r.total,
            r.profit,
            u8::from(r.on_time()),
            r.violation.map_or("", |v| v.as_str()),
        );
    }
}
