//! Task model and the delay-discounted profit function.

use serde::{Deserialize, Serialize};

pub type TaskId = u64;
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub origin_uav: NodeId,
    /// Input size in bits.
    pub data_bits: f64,
    /// CPU cycles needed per input bit.
    pub cycles_per_bit: f64,
    /// Tolerable latency in seconds, measured from arrival.
    pub deadline: f64,
    pub arrival_slot: u64,
}

impl Task {
    /// Total CPU cycles, `data_bits * cycles_per_bit`.
    pub fn workload(&self) -> f64 {
        self.data_bits * self.cycles_per_bit
    }

    pub fn is_valid(&self) -> bool {
        self.data_bits > 0.0
            && self.cycles_per_bit > 0.0
            && self.deadline >= 0.0
            && self.data_bits.is_finite()
            && self.cycles_per_bit.is_finite()
            && self.deadline.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitParams {
    /// Per-second discount rate applied to the tolerable latency.
    pub delay_sensitivity: f64,
}

impl Default for ProfitParams {
    fn default() -> Self {
        Self {
            delay_sensitivity: 5.0,
        }
    }
}

/// `data_bits * cycles_per_bit * exp(-delay_sensitivity * deadline)`.
///
/// Tighter deadlines earn more; the profit is only collected when the task
/// finishes within its deadline.
pub fn task_profit(task: &Task, params: &ProfitParams) -> f64 {
    task.workload() * (-params.delay_sensitivity * task.deadline).exp()
}
