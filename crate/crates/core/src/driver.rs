//! The episode loop shared by every scheduler.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{AgentAction, Env, EpisodeTrace, StepOutcome};
use crate::error::Result;
use crate::nn::DenseNet;

/// Learning and clustering facts about one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotInfo {
    pub cluster_count: usize,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    /// Seconds spent in training cycles during the slot.
    pub train_seconds: f64,
}

/// A scheduler driving the environment one slot at a time.
pub trait Controller {
    fn name(&self) -> &str;

    /// Called right after the environment was reset for `episode`.
    fn begin_episode(&mut self, env: &Env, episode: u64) -> Result<()>;

    /// One action per task in `env.pending_tasks()`.
    fn act(&mut self, env: &Env) -> Result<Vec<AgentAction>>;

    /// Sees the step result; learners store experience and train here.
    fn after_step(&mut self, env: &Env, outcome: &StepOutcome) -> Result<SlotInfo>;

    fn end_episode(&mut self, _env: &Env) -> Result<()> {
        Ok(())
    }

    /// Decision-making agents currently alive.
    fn agent_count(&self) -> usize;

    /// Networks to checkpoint, by file stem.
    fn networks(&self) -> Vec<(String, &DenseNet)> {
        Vec::new()
    }

    /// Cluster snapshot lines accumulated since the last call.
    fn take_cluster_log(&mut self) -> String {
        String::new()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: u64,
    pub trace: EpisodeTrace,
    pub slots: Vec<SlotInfo>,
    pub agent_count: usize,
    pub wall_seconds: f64,
    pub train_seconds: f64,
}

impl EpisodeLog {
    pub fn profit(&self) -> f64 {
        self.trace.total_reward()
    }
}

/// Runs `episodes` episodes, handing each finished episode to `sink`.
pub fn run_episodes(
    env: &mut Env,
    ctl: &mut dyn Controller,
    episodes: u64,
    mut sink: impl FnMut(EpisodeLog, &mut dyn Controller) -> Result<()>,
) -> Result<()> {
    let name = ctl.name().to_string();
    for episode in 0..episodes {
        let started = Instant::now();
        env.reset(episode);
        ctl.begin_episode(env, episode)
            .map_err(|e| e.context(format!("{name} episode {episode}")))?;
        let mut slots = Vec::with_capacity(env.config().episode_slots as usize);
        while !env.is_done() {
            let slot = env.slot();
            let ctx = |e: crate::Error| e.context(format!("{name} episode {episode} slot {slot}"));
            let actions = ctl.act(env).map_err(ctx)?;
            let outcome = env.step(&actions).map_err(ctx)?;
            slots.push(ctl.after_step(env, &outcome).map_err(ctx)?);
        }
        ctl.end_episode(env)?;
        let train_seconds = slots.iter().map(|s| s.train_seconds).sum();
        let log = EpisodeLog {
            episode,
            trace: env.trace().clone(),
            slots,
            agent_count: ctl.agent_count(),
            wall_seconds: started.elapsed().as_secs_f64(),
            train_seconds,
        };
        sink(log, ctl)?;
    }
    Ok(())
}
