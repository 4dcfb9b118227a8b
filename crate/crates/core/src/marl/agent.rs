//! Per-head actors and action selection.

use rand::Rng;

use super::noise::OUNoise;
use super::TrainConfig;
use crate::env::Action;
use crate::error::{Error, Result};
use crate::link::DeviceId;
use crate::nn::{sigmoid, softmax_in_place, AdamConfig, AdamState, DenseNet, OutputHead};
use crate::rng::SimRng;
use crate::task::NodeId;

#[derive(Debug, Clone)]
pub struct AgentBundle {
    /// Head UAV currently driving this actor.
    pub id: NodeId,
    pub actor: DenseNet,
    pub target_actor: DenseNet,
    pub optimizer: AdamState,
    pub noise: OUNoise,
}

impl AgentBundle {
    /// Actor with a softmax over `n_devices` choices and one sigmoid
    /// priority unit.
    pub fn new<R: Rng + ?Sized>(
        id: NodeId,
        obs_dim: usize,
        n_devices: usize,
        cfg: &TrainConfig,
        init: &mut R,
        noise_rng: SimRng,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend(&cfg.actor_hidden);
        sizes.push(n_devices + 1);
        let heads = vec![OutputHead::Softmax(n_devices), OutputHead::Sigmoid(1)];
        let actor = DenseNet::new(&sizes, heads, init)?;
        Ok(Self::from_actor(id, actor, cfg, noise_rng))
    }

    pub fn from_actor(id: NodeId, actor: DenseNet, cfg: &TrainConfig, noise_rng: SimRng) -> Self {
        let dim = actor.output_dim();
        Self {
            id,
            target_actor: actor.clone(),
            optimizer: AdamState::new(actor.param_count(), AdamConfig::with_learning_rate(cfg.actor_lr)),
            noise: OUNoise::new(dim, cfg.noise_sigma, cfg.noise_theta, noise_rng),
            actor,
        }
    }

    /// Takes over another bundle's learned state, keeping its own noise.
    pub fn inherit(&mut self, from: &AgentBundle) {
        self.actor = from.actor.clone();
        self.target_actor = from.target_actor.clone();
        self.optimizer = from.optimizer.clone();
    }
}

/// An executable action plus the continuous encoding the critic sees.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice {
    pub action: Action,
    /// Device probabilities followed by the priority.
    pub encoding: Vec<f64>,
}

/// Turns raw actor outputs (device logits then the pre-sigmoid priority)
/// into an action. The device is the arg-max logit, lowest index on ties.
pub fn decode_action(raw: &[f64], n_bs: usize) -> Result<ActionChoice> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("actor output {raw:?}")));
    }
    let n_dev = n_bs + 2;
    if raw.len() != n_dev + 1 {
        return Err(Error::contract(format!(
            "actor output has {} entries, expected {}",
            raw.len(),
            n_dev + 1
        )));
    }
    let logits = &raw[..n_dev];
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    let mut encoding = logits.to_vec();
    softmax_in_place(&mut encoding);
    let priority = sigmoid(raw[n_dev]).clamp(0.0, 1.0);
    encoding.push(priority);
    let device = DeviceId::from_action_index(best, n_bs).expect("index within devices");
    Ok(ActionChoice {
        action: Action { device, priority },
        encoding,
    })
}

/// Runs the actor on the agent's own observation. With `explore`, the
/// agent's OU noise times `noise_scale` perturbs the raw outputs.
pub fn select_action(
    agent: &mut AgentBundle,
    obs: &[f64],
    n_bs: usize,
    explore: bool,
    noise_scale: f64,
) -> Result<ActionChoice> {
    let (_, cache) = agent.actor.forward(obs)?;
    let mut raw = cache.raw().row(0).to_vec();
    if explore {
        let noise = agent.noise.sample();
        for (r, n) in raw.iter_mut().zip(noise) {
            *r += noise_scale * n;
        }
    }
    decode_action(&raw, n_bs)
}
