//! Cluster-head actors trained against a centralized critic.
//!
//! Each agent acts on its own observation only. The critic scores the
//! joint observation and action of every agent slot (padded to a fixed
//! count, with a presence mask) and is used during training alone.

mod agent;
mod buffer;
mod controller;
mod noise;
mod update;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{decode_action, select_action, ActionChoice, AgentBundle};
pub use buffer::{ReplayBuffer, Transition};
pub use controller::{cmaddpg_run, CriticMode, Grouping, MarlController};
pub use noise::OUNoise;
pub use update::{
    actor_gradient, actor_update, critic_target, critic_update, train_cycle, ActionValue, CriticBundle,
    CycleMetrics,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Slots between training cycles.
    pub update_period: u64,
    pub warmup_transitions: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub noise_sigma: f64,
    pub noise_theta: f64,
    /// Multiplier on the OU sample at episode 0.
    pub noise_scale: f64,
    /// Per-episode multiplicative decay of the noise multiplier.
    pub noise_decay: f64,
    pub noise_floor: f64,
    /// Profit is multiplied by this before it reaches the learner.
    pub reward_scale: f64,
    /// Weight of the squared pre-activation actor outputs in the actor loss.
    pub logit_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.01,
            batch_size: 64,
            update_period: 10,
            warmup_transitions: 1000,
            buffer_capacity: 100_000,
            actor_lr: 0.01,
            critic_lr: 0.001,
            actor_hidden: vec![128, 128],
            critic_hidden: vec![256, 128],
            noise_sigma: 0.3,
            noise_theta: 0.15,
            noise_scale: 1.0,
            noise_decay: 0.99,
            noise_floor: 0.05,
            reward_scale: 1e-9,
            logit_penalty: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(format!("training.{k}"), m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.update_period == 0 {
            return bad("update_period", "must be at least 1");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity", "must hold at least one batch");
        }
        if !(self.actor_lr > 0.0) {
            return bad("actor_lr", "must be positive");
        }
        if !(self.critic_lr > 0.0) {
            return bad("critic_lr", "must be positive");
        }
        if self.actor_hidden.contains(&0) {
            return bad("actor_hidden", "layer widths must be positive");
        }
        if self.critic_hidden.contains(&0) {
            return bad("critic_hidden", "layer widths must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_theta >= 0.0 && self.noise_scale >= 0.0) {
            return bad("noise_sigma", "noise parameters must be non-negative");
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return bad("noise_decay", "must lie in (0, 1]");
        }
        if !(self.noise_floor >= 0.0) {
            return bad("noise_floor", "must be non-negative");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale", "must be positive");
        }
        if !(self.logit_penalty >= 0.0 && self.logit_penalty.is_finite()) {
            return bad("logit_penalty", "must be non-negative");
        }
        Ok(())
    }

    /// Noise multiplier used during `episode`.
    pub fn noise_at(&self, episode: u64) -> f64 {
        (self.noise_scale * self.noise_decay.powf(episode as f64)).max(self.noise_floor.min(self.noise_scale))
    }
}

/// Shape of the critic input: observations of every agent slot, then
/// their actions, then (optionally) their presence flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointLayout {
    pub agents: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub with_mask: bool,
}

impl JointLayout {
    pub fn input_dim(&self) -> usize {
        self.agents * (self.obs_dim + self.act_dim) + if self.with_mask { self.agents } else { 0 }
    }

    pub fn act_offset(&self, k: usize) -> usize {
        self.agents * self.obs_dim + k * self.act_dim
    }

    pub fn write_input(&self, obs: &[f64], actions: &[f64], mask: &[f64], row: &mut [f64]) {
        let (o, a) = (self.agents * self.obs_dim, self.agents * self.act_dim);
        row[..o].copy_from_slice(obs);
        row[o..o + a].copy_from_slice(actions);
        if self.with_mask {
            row[o + a..].copy_from_slice(mask);
        }
    }
}
