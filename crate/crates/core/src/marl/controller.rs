//! Drives the environment with learned actors and turns slots into
//! replay transitions.
//!
//! Within a slot every agent handles the tasks of its own cluster in id
//! order. The r-th decisions of all agents form decision round r, which is
//! one joint transition; its reward is the profit those tasks eventually
//! earn, so a transition is stored only once all of its tasks resolved.

use std::collections::HashMap;
use std::time::Instant;

use super::agent::{select_action, AgentBundle};
use super::buffer::{ReplayBuffer, Transition};
use super::update::{train_cycle, CriticBundle, CycleMetrics};
use super::{JointLayout, TrainConfig};
use crate::baselines::greedy_action;
use crate::clustering::{
    kmeans_cluster, maintenance_step, optimal_cluster_count, should_recluster, write_snapshot, ClusterConfig,
    ClusterState, MaintenanceEvent,
};
use crate::driver::{run_episodes, Controller, EpisodeLog, SlotInfo};
use crate::env::{AgentAction, Env, EnvConfig, Observation, ScenarioPreset, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::DenseNet;
use crate::rng::{stream, stream_indexed, SimRng, Stream};
use crate::task::{Task, TaskId};

/// How UAVs are grouped into decision makers.
#[derive(Debug, Clone, PartialEq)]
pub enum Grouping {
    /// Cluster heads decide for their members; the head count is fixed by
    /// the coverage model for the whole run.
    Kmduc(ClusterConfig),
    /// Every UAV decides for itself.
    Singletons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticMode {
    /// One critic over all agent slots.
    Joint,
    /// One critic per agent that sees only that agent.
    Independent,
}

#[derive(Debug, Clone)]
struct Round {
    obs: Vec<f64>,
    actions: Vec<f64>,
    mask: Vec<f64>,
    /// Scaled profit earned per agent slot.
    rewards: Vec<f64>,
    outstanding: usize,
}

pub struct MarlController {
    name: String,
    cfg: TrainConfig,
    grouping: Grouping,
    mode: CriticMode,
    seed: u64,
    n_bs: usize,
    obs_dim: usize,
    act_dim: usize,
    slots: usize,
    agents: Vec<AgentBundle>,
    critics: Vec<CriticBundle>,
    buffers: Vec<ReplayBuffer>,
    layout: JointLayout,
    clusters: ClusterState,
    placed: bool,
    cluster_rng: SimRng,
    sample_rng: SimRng,
    noise_scale: f64,
    explore: bool,
    learn: bool,
    rounds: Vec<Round>,
    pending: HashMap<TaskId, (usize, usize)>,
    cursors: Vec<usize>,
    episode_done: bool,
    global_slot: u64,
    /// Run-wide number of the current episode's first slot.
    slot_offset: u64,
    log: String,
}

impl MarlController {
    pub fn new(
        name: &str,
        env: &Env,
        grouping: Grouping,
        mode: CriticMode,
        cfg: TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let ecfg = env.config();
        let slots = match &grouping {
            Grouping::Kmduc(c) => {
                c.validate()?;
                optimal_cluster_count(ecfg.n_uavs, ecfg.area_side * ecfg.area_side, c).count
            }
            Grouping::Singletons => ecfg.n_uavs,
        };
        let n_bs = ecfg.n_bs;
        let obs_dim = Observation::dim(n_bs);
        let n_devices = ecfg.n_devices();
        let act_dim = n_devices + 1;
        let mut init = stream(seed, Stream::Init);
        let agents = (0..slots)
            .map(|k| AgentBundle::new(k, obs_dim, n_devices, &cfg, &mut init, stream_indexed(seed, Stream::Noise, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        let (layout, critic_count) = match mode {
            CriticMode::Joint => (
                JointLayout {
                    agents: slots,
                    obs_dim,
                    act_dim,
                    with_mask: true,
                },
                1,
            ),
            CriticMode::Independent => (
                JointLayout {
                    agents: 1,
                    obs_dim,
                    act_dim,
                    with_mask: false,
                },
                slots,
            ),
        };
        let critics = (0..critic_count)
            .map(|_| CriticBundle::new(&layout, &cfg, &mut init))
            .collect::<Result<Vec<_>>>()?;
        let buffers = (0..critic_count).map(|_| ReplayBuffer::new(cfg.buffer_capacity)).collect();
        Ok(Self {
            name: name.to_string(),
            noise_scale: cfg.noise_at(0),
            cfg,
            grouping,
            mode,
            seed,
            n_bs,
            obs_dim,
            act_dim,
            slots,
            agents,
            critics,
            buffers,
            layout,
            clusters: ClusterState::default(),
            placed: false,
            cluster_rng: stream(seed, Stream::Clustering),
            sample_rng: stream(seed, Stream::Sampling),
            explore: true,
            learn: true,
            rounds: Vec::new(),
            pending: HashMap::new(),
            cursors: vec![0; critic_count],
            episode_done: false,
            global_slot: 0,
            slot_offset: 0,
            log: String::new(),
        })
    }

    /// Switches exploration and training off (or back on).
    pub fn set_evaluation(&mut self, evaluation: bool) {
        self.explore = !evaluation;
        self.learn = !evaluation;
    }

    /// Number of agent slots the critic is sized for.
    pub fn agent_slots(&self) -> usize {
        self.slots
    }

    pub fn agents(&self) -> &[AgentBundle] {
        &self.agents
    }

    pub fn clusters(&self) -> &ClusterState {
        &self.clusters
    }

    pub fn buffers(&self) -> &[ReplayBuffer] {
        &self.buffers
    }

    pub fn buffer_len(&self) -> usize {
        self.buffers.iter().map(ReplayBuffer::len).sum()
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    fn regroup(&mut self, env: &Env) -> Result<()> {
        let positions = env.uav_positions();
        let slot = env.slot();
        let cfg = match &self.grouping {
            Grouping::Singletons => {
                self.clusters = ClusterState::singletons(&positions);
                return Ok(());
            }
            Grouping::Kmduc(cfg) => cfg,
        };
        if !self.placed || should_recluster(slot, cfg) {
            let (next, _) = kmeans_cluster(&positions, self.slots, &mut self.cluster_rng, cfg);
            let heads: Vec<usize> = next.heads().collect();
            if self.placed {
                // each new head inherits the actor of the nearest old head
                let old = self.agents.clone();
                for (k, &h) in heads.iter().enumerate() {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (j, a) in old.iter().enumerate() {
                        let d = positions[h].distance(&positions[a.id]);
                        if d < best_d {
                            best = j;
                            best_d = d;
                        }
                    }
                    self.agents[k].inherit(&old[best]);
                    self.agents[k].id = h;
                }
            } else {
                for (a, &h) in self.agents.iter_mut().zip(&heads) {
                    a.id = h;
                }
                self.placed = true;
            }
            self.clusters = next;
            write_snapshot(&mut self.log, self.slot_offset + slot, &self.clusters);
            return Ok(());
        }
        let (next, events) = maintenance_step(&self.clusters, &positions, slot, cfg);
        for e in &events {
            if let MaintenanceEvent::HeadReplaced { old, new } = e {
                if let Some(a) = self.agents.iter_mut().find(|a| a.id == *old) {
                    a.id = *new;
                }
            }
        }
        let mut ordered = Vec::with_capacity(self.agents.len());
        for h in next.heads() {
            let i = self
                .agents
                .iter()
                .position(|a| a.id == h)
                .ok_or_else(|| Error::contract(format!("no agent drives head {h}")))?;
            ordered.push(i);
        }
        if ordered.len() != self.agents.len() {
            return Err(Error::contract("cluster count changed outside re-clustering"));
        }
        let mut taken: Vec<Option<AgentBundle>> = std::mem::take(&mut self.agents).into_iter().map(Some).collect();
        self.agents = ordered.into_iter().map(|i| taken[i].take().expect("distinct heads")).collect();
        if next.clusters != self.clusters.clusters || next.isolated != self.clusters.isolated {
            write_snapshot(&mut self.log, self.slot_offset + slot, &next);
        }
        self.clusters = next;
        Ok(())
    }

    fn flush(&mut self) {
        match self.mode {
            CriticMode::Joint => {
                let m = self.slots;
                while self.cursors[0] < self.rounds.len() {
                    let i = self.cursors[0];
                    let last = i + 1 == self.rounds.len();
                    if self.rounds[i].outstanding > 0 || (last && !self.episode_done) {
                        break;
                    }
                    let r = &self.rounds[i];
                    let (next_obs, next_mask) = if last {
                        (vec![0.0; m * self.obs_dim], vec![0.0; m])
                    } else {
                        (self.rounds[i + 1].obs.clone(), self.rounds[i + 1].mask.clone())
                    };
                    self.buffers[0].push(Transition {
                        obs: r.obs.clone(),
                        actions: r.actions.clone(),
                        mask: r.mask.clone(),
                        reward: r.rewards.iter().sum(),
                        next_obs,
                        next_mask,
                        done: last,
                    });
                    self.cursors[0] += 1;
                }
            }
            CriticMode::Independent => {
                let (od, ad) = (self.obs_dim, self.act_dim);
                for k in 0..self.slots {
                    while self.cursors[k] < self.rounds.len() {
                        let i = self.cursors[k];
                        let r = &self.rounds[i];
                        if r.mask[k] == 0.0 {
                            self.cursors[k] += 1;
                            continue;
                        }
                        if r.outstanding > 0 {
                            break;
                        }
                        let next = self.rounds[i + 1..].iter().find(|n| n.mask[k] > 0.0);
                        if next.is_none() && !self.episode_done {
                            break;
                        }
                        let t = Transition {
                            obs: r.obs[k * od..(k + 1) * od].to_vec(),
                            actions: r.actions[k * ad..(k + 1) * ad].to_vec(),
                            mask: vec![1.0],
                            reward: r.rewards[k],
                            next_obs: next.map_or_else(|| vec![0.0; od], |n| n.obs[k * od..(k + 1) * od].to_vec()),
                            next_mask: vec![if next.is_some() { 1.0 } else { 0.0 }],
                            done: next.is_none(),
                        };
                        self.buffers[k].push(t);
                        self.cursors[k] += 1;
                    }
                }
            }
        }
    }

    fn train(&mut self) -> Result<Option<CycleMetrics>> {
        match self.mode {
            CriticMode::Joint => train_cycle(
                &mut self.agents,
                &mut self.critics[0],
                &self.buffers[0],
                &self.layout,
                &self.cfg,
                &mut self.sample_rng,
            ),
            CriticMode::Independent => {
                let mut sum: Option<CycleMetrics> = None;
                let mut n = 0.0;
                for k in 0..self.slots {
                    let m = train_cycle(
                        &mut self.agents[k..=k],
                        &mut self.critics[k],
                        &self.buffers[k],
                        &self.layout,
                        &self.cfg,
                        &mut self.sample_rng,
                    )?;
                    if let Some(m) = m {
                        n += 1.0;
                        let s = sum.get_or_insert(CycleMetrics {
                            critic_loss: 0.0,
                            actor_objective: 0.0,
                        });
                        s.critic_loss += m.critic_loss;
                        s.actor_objective += m.actor_objective;
                    }
                }
                Ok(sum.map(|s| CycleMetrics {
                    critic_loss: s.critic_loss / n,
                    actor_objective: s.actor_objective / n,
                }))
            }
        }
    }
}

impl Controller for MarlController {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, env: &Env, episode: u64) -> Result<()> {
        self.slot_offset = episode * env.config().episode_slots;
        self.noise_scale = self.cfg.noise_at(episode);
        for a in &mut self.agents {
            a.noise.reset();
        }
        self.rounds.clear();
        self.pending.clear();
        self.cursors.iter_mut().for_each(|c| *c = 0);
        self.episode_done = false;
        self.cluster_rng = stream_indexed(self.seed, Stream::Clustering, episode);
        self.placed = self.placed && matches!(self.grouping, Grouping::Kmduc(_));
        Ok(())
    }

    fn act(&mut self, env: &Env) -> Result<Vec<AgentAction>> {
        self.regroup(env)?;
        let tasks = env.pending_tasks();
        let mut per_agent: Vec<Vec<&Task>> = vec![Vec::new(); self.agents.len()];
        let mut isolated = Vec::new();
        for t in tasks {
            match self.clusters.cluster_of(t.origin_uav) {
                Some(k) => per_agent[k].push(t),
                None => isolated.push(t),
            }
        }
        let mut out = Vec::with_capacity(tasks.len());
        if !isolated.is_empty() {
            let mut snap = env.queue_snapshot();
            for t in isolated {
                out.push(AgentAction {
                    agent: t.origin_uav,
                    task: t.id,
                    action: greedy_action(env, t, &mut snap),
                });
            }
        }
        let (m, od, ad) = (self.slots, self.obs_dim, self.act_dim);
        let depth = per_agent.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..depth {
            let mut round = Round {
                obs: vec![0.0; m * od],
                actions: vec![0.0; m * ad],
                mask: vec![0.0; m],
                rewards: vec![0.0; m],
                outstanding: 0,
            };
            for (k, list) in per_agent.iter().enumerate() {
                let Some(task) = list.get(r) else { continue };
                let head = self.clusters.clusters[k].head;
                let obs = env.observe(&self.clusters, head, task)?.features(env.scale());
                let choice = select_action(&mut self.agents[k], &obs, self.n_bs, self.explore, self.noise_scale)?;
                round.obs[k * od..(k + 1) * od].copy_from_slice(&obs);
                round.actions[k * ad..(k + 1) * ad].copy_from_slice(&choice.encoding);
                round.mask[k] = 1.0;
                round.outstanding += 1;
                self.pending.insert(task.id, (self.rounds.len(), k));
                out.push(AgentAction {
                    agent: head,
                    task: task.id,
                    action: choice.action,
                });
            }
            self.rounds.push(round);
        }
        Ok(out)
    }

    fn after_step(&mut self, _env: &Env, outcome: &StepOutcome) -> Result<SlotInfo> {
        for res in &outcome.resolutions {
            if let Some((i, k)) = self.pending.remove(&res.task.id) {
                let round = &mut self.rounds[i];
                if res.on_time() {
                    round.rewards[k] += res.profit * self.cfg.reward_scale;
                }
                round.outstanding -= 1;
            }
        }
        if outcome.done {
            // still-queued tasks earn nothing
            self.episode_done = true;
            self.pending.clear();
            for r in &mut self.rounds {
                r.outstanding = 0;
            }
        }
        let mut info = SlotInfo {
            cluster_count: self.clusters.cluster_count(),
            ..SlotInfo::default()
        };
        if !self.learn {
            return Ok(info);
        }
        self.flush();
        self.global_slot += 1;
        if self.global_slot.is_multiple_of(self.cfg.update_period) {
            let started = Instant::now();
            if let Some(m) = self.train()? {
                info.critic_loss = Some(m.critic_loss);
                info.actor_objective = Some(m.actor_objective);
            }
            info.train_seconds = started.elapsed().as_secs_f64();
        }
        Ok(info)
    }

    fn agent_count(&self) -> usize {
        self.agents.len()
    }

    fn networks(&self) -> Vec<(String, &DenseNet)> {
        let mut nets: Vec<(String, &DenseNet)> =
            self.agents.iter().enumerate().map(|(k, a)| (format!("actor_{k}"), &a.actor)).collect();
        match self.mode {
            CriticMode::Joint => nets.push(("critic".into(), &self.critics[0].net)),
            CriticMode::Independent => {
                nets.extend(self.critics.iter().enumerate().map(|(k, c)| (format!("critic_{k}"), &c.net)))
            }
        }
        nets
    }

    fn take_cluster_log(&mut self) -> String {
        std::mem::take(&mut self.log)
    }
}

/// Trains the clustered scheduler for `episodes` episodes and returns the
/// per-episode logs.
pub fn cmaddpg_run(
    env_cfg: EnvConfig,
    scenario: ScenarioPreset,
    clustering: ClusterConfig,
    training: TrainConfig,
    seed: u64,
    episodes: u64,
) -> Result<Vec<EpisodeLog>> {
    let mut env = Env::new(env_cfg, scenario, seed)?;
    let mut ctl = MarlController::new("cmaddpg", &env, Grouping::Kmduc(clustering), CriticMode::Joint, training, seed)?;
    let mut logs = Vec::new();
    run_episodes(&mut env, &mut ctl, episodes, |log, _| {
        logs.push(log);
        Ok(())
    })?;
    Ok(logs)
}
