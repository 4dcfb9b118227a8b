//! Comparison schedulers: the learned baselines without clustering and the
//! rule-based heuristics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterConfig;
use crate::driver::{Controller, SlotInfo};
use crate::env::{Action, AgentAction, Env, QueueSnapshot, StepOutcome};
use crate::error::{Error, Result};
use crate::link::DeviceId;
use crate::marl::{CriticMode, Grouping, MarlController, TrainConfig};
use crate::rng::{stream_indexed, SimRng, Stream};
use crate::task::Task;

/// Every scheduler the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cmaddpg,
    Maddpg,
    Maac,
    Greedy,
    Random,
    Local,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Cmaddpg,
        Algorithm::Maddpg,
        Algorithm::Maac,
        Algorithm::Greedy,
        Algorithm::Random,
        Algorithm::Local,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cmaddpg => "cmaddpg",
            Algorithm::Maddpg => "maddpg",
            Algorithm::Maac => "maac",
            Algorithm::Greedy => "greedy",
            Algorithm::Random => "random",
            Algorithm::Local => "local",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Algorithm::Cmaddpg | Algorithm::Maddpg | Algorithm::Maac)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm `{s}`")))
    }
}

/// Builds the controller for `algo` against `env`.
pub fn build_controller(
    algo: Algorithm,
    env: &Env,
    clustering: &ClusterConfig,
    training: &TrainConfig,
    seed: u64,
) -> Result<Box<dyn Controller>> {
    Ok(match algo {
        Algorithm::Cmaddpg => Box::new(MarlController::new(
            "cmaddpg",
            env,
            Grouping::Kmduc(clustering.clone()),
            CriticMode::Joint,
            training.clone(),
            seed,
        )?),
        Algorithm::Maddpg => Box::new(naive_maddpg(env, training, seed)?),
        Algorithm::Maac => Box::new(maac(env, training, seed)?),
        Algorithm::Greedy => Box::new(Heuristic::new(HeuristicKind::GreedyNearest, seed)),
        Algorithm::Random => Box::new(Heuristic::new(HeuristicKind::RandomOffload, seed)),
        Algorithm::Local => Box::new(Heuristic::new(HeuristicKind::LocalOnly, seed)),
    })
}

/// One actor per UAV and one critic over all of them.
pub fn naive_maddpg(env: &Env, training: &TrainConfig, seed: u64) -> Result<MarlController> {
    MarlController::new("maddpg", env, Grouping::Singletons, CriticMode::Joint, training.clone(), seed)
}

/// One actor and one private critic per UAV.
pub fn maac(env: &Env, training: &TrainConfig, seed: u64) -> Result<MarlController> {
    MarlController::new("maac", env, Grouping::Singletons, CriticMode::Independent, training.clone(), seed)
}

/// Priority that orders tighter deadlines first.
pub fn urgency(task: &Task, env: &Env) -> f64 {
    (1.0 - task.deadline / env.scale().deadline).clamp(0.0, 1.0)
}

/// The destination with the smallest estimated delay among those expected
/// to meet the deadline, falling back to local execution. The choice is
/// booked into `snap`.
pub fn greedy_action(env: &Env, task: &Task, snap: &mut QueueSnapshot) -> Action {
    let est = env.estimate_delays(task, snap);
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in est.iter().enumerate() {
        if let Some(d) = *e {
            if d <= task.deadline && best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
    }
    let device = match best {
        Some((i, _)) => DeviceId::from_action_index(i, env.config().n_bs).expect("index in range"),
        None => DeviceId::Local,
    };
    env.commit_estimate(task, device, snap);
    Action {
        device,
        priority: urgency(task, env),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    GreedyNearest,
    /// Uniform over the reachable destinations, uniform priority.
    RandomOffload,
    LocalOnly,
}

pub struct Heuristic {
    kind: HeuristicKind,
    seed: u64,
    rng: SimRng,
    n_uavs: usize,
}

impl Heuristic {
    pub fn new(kind: HeuristicKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            rng: stream_indexed(seed, Stream::Heuristic, 0),
            n_uavs: 0,
        }
    }
}

impl Controller for Heuristic {
    fn name(&self) -> &str {
        match self.kind {
            HeuristicKind::GreedyNearest => "greedy",
            HeuristicKind::RandomOffload => "random",
            HeuristicKind::LocalOnly => "local",
        }
    }

    fn begin_episode(&mut self, env: &Env, episode: u64) -> Result<()> {
        self.rng = stream_indexed(self.seed, Stream::Heuristic, episode);
        self.n_uavs = env.config().n_uavs;
        Ok(())
    }

    fn act(&mut self, env: &Env) -> Result<Vec<AgentAction>> {
        let mut snap = env.queue_snapshot();
        let n_bs = env.config().n_bs;
        let mut out = Vec::with_capacity(env.pending_tasks().len());
        for task in env.pending_tasks() {
            let action = match self.kind {
                HeuristicKind::GreedyNearest => greedy_action(env, task, &mut snap),
                HeuristicKind::LocalOnly => Action {
                    device: DeviceId::Local,
                    priority: 0.5,
                },
                HeuristicKind::RandomOffload => {
                    let reachable: Vec<usize> = env
                        .estimate_delays(task, &snap)
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.is_some())
                        .map(|(i, _)| i)
                        .collect();
                    let pick = reachable[self.rng.random_range(0..reachable.len())];
                    Action {
                        device: DeviceId::from_action_index(pick, n_bs).expect("index in range"),
                        priority: self.rng.random_range(0.0..=1.0),
                    }
                }
            };
            out.push(AgentAction {
                agent: task.origin_uav,
                task: task.id,
                action,
            });
        }
        Ok(out)
    }

    fn after_step(&mut self, _env: &Env, _outcome: &StepOutcome) -> Result<SlotInfo> {
        Ok(SlotInfo {
            cluster_count: self.n_uavs,
            ..SlotInfo::default()
        })
    }

    fn agent_count(&self) -> usize {
        self.n_uavs
    }
}
