//! Critic targets, critic and actor steps, and the training cycle.

use rand::Rng;

use super::agent::AgentBundle;
use super::buffer::{ReplayBuffer, Transition};
use super::{JointLayout, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{soft_update, AdamConfig, AdamState, DenseNet, Matrix, OutputHead};

/// Anything that scores joint inputs and differentiates the score with
/// respect to them.
pub trait ActionValue {
    fn values(&self, input: &Matrix) -> Result<Vec<f64>>;

    /// Values plus the gradient of their sum with respect to each input row.
    fn values_and_input_grad(&self, input: &Matrix) -> Result<(Vec<f64>, Matrix)>;
}

impl ActionValue for DenseNet {
    fn values(&self, input: &Matrix) -> Result<Vec<f64>> {
        let cache = self.forward_batch(input)?;
        Ok(cache.output().as_slice().to_vec())
    }

    fn values_and_input_grad(&self, input: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let cache = self.forward_batch(input)?;
        let ones = Matrix::from_vec(input.rows(), 1, vec![1.0; input.rows()]);
        let grads = self.backward(&cache, &ones)?;
        Ok((cache.output().as_slice().to_vec(), grads.input))
    }
}

/// A critic with its target copy and optimizer.
#[derive(Debug, Clone)]
pub struct CriticBundle {
    pub net: DenseNet,
    pub target: DenseNet,
    pub optimizer: AdamState,
}

impl CriticBundle {
    pub fn new<R: Rng + ?Sized>(layout: &JointLayout, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![layout.input_dim()];
        sizes.extend(&cfg.critic_hidden);
        sizes.push(1);
        let net = DenseNet::new(&sizes, vec![OutputHead::Identity(1)], rng)?;
        Ok(Self::from_net(net, cfg))
    }

    pub fn from_net(net: DenseNet, cfg: &TrainConfig) -> Self {
        Self {
            target: net.clone(),
            optimizer: AdamState::new(net.param_count(), AdamConfig::with_learning_rate(cfg.critic_lr)),
            net,
        }
    }
}

fn stored_inputs(layout: &JointLayout, batch: &[&Transition]) -> Matrix {
    let mut input = Matrix::zeros(batch.len(), layout.input_dim());
    for (r, t) in batch.iter().enumerate() {
        layout.write_input(&t.obs, &t.actions, &t.mask, input.row_mut(r));
    }
    input
}

fn present_rows(mask: impl Fn(usize) -> f64, n: usize) -> Vec<usize> {
    (0..n).filter(|&r| mask(r) > 0.5).collect()
}

/// Agent `k`'s observations from the given rows, current or next.
fn gather_obs(layout: &JointLayout, batch: &[&Transition], rows: &[usize], k: usize, next: bool) -> Matrix {
    let mut m = Matrix::zeros(rows.len(), layout.obs_dim);
    let span = k * layout.obs_dim..(k + 1) * layout.obs_dim;
    for (i, &r) in rows.iter().enumerate() {
        let t = batch[r];
        let src = if next { &t.next_obs } else { &t.obs };
        m.row_mut(i).copy_from_slice(&src[span.clone()]);
    }
    m
}

/// `y = r + gamma * Q'(o', a')`, where each present agent's next action
/// comes from its target actor. Terminal rounds keep `y = r`.
pub fn critic_target(
    target_critic: &impl ActionValue,
    target_actors: &[&DenseNet],
    layout: &JointLayout,
    batch: &[&Transition],
    gamma: f64,
) -> Result<Vec<f64>> {
    if gamma == 0.0 {
        return Ok(batch.iter().map(|t| t.reward).collect());
    }
    let n = batch.len();
    let mut input = Matrix::zeros(n, layout.input_dim());
    let no_actions = vec![0.0; layout.agents * layout.act_dim];
    for (r, t) in batch.iter().enumerate() {
        layout.write_input(&t.next_obs, &no_actions, &t.next_mask, input.row_mut(r));
    }
    for (k, actor) in target_actors.iter().enumerate().take(layout.agents) {
        let rows = present_rows(|r| batch[r].next_mask[k], n);
        if rows.is_empty() {
            continue;
        }
        let obs = gather_obs(layout, batch, &rows, k, true);
        let out = actor.forward_batch(&obs)?;
        let at = layout.act_offset(k);
        for (i, &r) in rows.iter().enumerate() {
            input.row_mut(r)[at..at + layout.act_dim].copy_from_slice(out.output().row(i));
        }
    }
    let q = target_critic.values(&input)?;
    Ok(batch
        .iter()
        .zip(q)
        .map(|(t, q)| if t.done { t.reward } else { t.reward + gamma * q })
        .collect())
}

/// One optimizer step on the mean squared TD error. Returns the loss
/// before the step; a non-finite loss leaves the critic untouched.
pub fn critic_update(
    critic: &mut DenseNet,
    optimizer: &mut AdamState,
    layout: &JointLayout,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<f64> {
    let n = batch.len();
    if n == 0 || targets.len() != n {
        return Err(Error::contract("critic batch and targets must be non-empty and aligned"));
    }
    let input = stored_inputs(layout, batch);
    let cache = critic.forward_batch(&input)?;
    let q = cache.output().as_slice();
    let loss = q.iter().zip(targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    let grad: Vec<f64> = q.iter().zip(targets).map(|(q, y)| 2.0 * (q - y) / n as f64).collect();
    let grads = critic.backward(&cache, &Matrix::from_vec(n, 1, grad))?;
    optimizer.step(critic.params_mut(), &grads.params)?;
    Ok(loss)
}

/// Gradient of the actor loss for agent `k`: the negated mean critic value
/// (other agents' stored actions held fixed) plus `logit_penalty` times the
/// mean squared pre-head output. The penalty keeps the softmax from
/// saturating, where its gradient vanishes. Returns the mean critic value
/// and the gradient, or `None` when the agent is absent from the batch.
pub fn actor_gradient(
    agent_actor: &DenseNet,
    k: usize,
    critic: &impl ActionValue,
    layout: &JointLayout,
    batch: &[&Transition],
    logit_penalty: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let rows = present_rows(|r| batch[r].mask[k], batch.len());
    if rows.is_empty() {
        return Ok(None);
    }
    let n = rows.len();
    let obs = gather_obs(layout, batch, &rows, k, false);
    let cache = agent_actor.forward_batch(&obs)?;
    let mut input = Matrix::zeros(n, layout.input_dim());
    let at = layout.act_offset(k);
    for (i, &r) in rows.iter().enumerate() {
        let t = batch[r];
        let row = input.row_mut(i);
        layout.write_input(&t.obs, &t.actions, &t.mask, row);
        row[at..at + layout.act_dim].copy_from_slice(cache.output().row(i));
    }
    let (q, grad_in) = critic.values_and_input_grad(&input)?;
    let objective = q.iter().sum::<f64>() / n as f64;
    // ascent on the objective is descent on its negation
    let d = layout.act_dim;
    let mut grad_out = vec![0.0; d];
    let mut grad_raw = Matrix::zeros(n, d);
    for i in 0..n {
        let src = &grad_in.row(i)[at..at + d];
        for (g, s) in grad_out.iter_mut().zip(src) {
            *g = -s / n as f64;
        }
        agent_actor.heads_backward(cache.output().row(i), &grad_out, grad_raw.row_mut(i));
        if logit_penalty > 0.0 {
            for (g, z) in grad_raw.row_mut(i).iter_mut().zip(cache.raw().row(i)) {
                *g += 2.0 * logit_penalty * z / (n * d) as f64;
            }
        }
    }
    let grads = agent_actor.backward_raw(&cache, grad_raw)?;
    Ok(Some((objective, grads.params)))
}

/// One ascent step of agent `k`'s actor on the critic's value.
pub fn actor_update(
    agent: &mut AgentBundle,
    k: usize,
    critic: &impl ActionValue,
    layout: &JointLayout,
    batch: &[&Transition],
    logit_penalty: f64,
) -> Result<Option<f64>> {
    let Some((objective, grads)) = actor_gradient(&agent.actor, k, critic, layout, batch, logit_penalty)? else {
        return Ok(None);
    };
    if !objective.is_finite() {
        return Err(Error::NonFinite("actor objective".into()));
    }
    agent.optimizer.step(agent.actor.params_mut(), &grads)?;
    Ok(Some(objective))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMetrics {
    pub critic_loss: f64,
    /// Mean over agents that appeared in the batch.
    pub actor_objective: f64,
}

/// Sample, fit the critic, step every actor, then soft-update all targets.
/// Skips (returns `None`) until the buffer holds enough transitions.
pub fn train_cycle<R: Rng + ?Sized>(
    agents: &mut [AgentBundle],
    critic: &mut CriticBundle,
    buffer: &ReplayBuffer,
    layout: &JointLayout,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Option<CycleMetrics>> {
    if buffer.len() < cfg.warmup_transitions.max(cfg.batch_size) {
        return Ok(None);
    }
    let batch = buffer.sample(cfg.batch_size, rng).expect("size checked");
    let targets = {
        let actors: Vec<&DenseNet> = agents.iter().map(|a| &a.target_actor).collect();
        critic_target(&critic.target, &actors, layout, &batch, cfg.gamma)?
    };
    let critic_loss = critic_update(&mut critic.net, &mut critic.optimizer, layout, &batch, &targets)?;
    let mut objectives = Vec::new();
    for (k, agent) in agents.iter_mut().enumerate() {
        if let Some(j) = actor_update(agent, k, &critic.net, layout, &batch, cfg.logit_penalty)? {
            objectives.push(j);
        }
    }
    soft_update(&mut critic.target, &critic.net, cfg.tau)?;
    for agent in agents.iter_mut() {
        soft_update(&mut agent.target_actor, &agent.actor, cfg.tau)?;
    }
    let actor_objective = if objectives.is_empty() {
        0.0
    } else {
        objectives.iter().sum::<f64>() / objectives.len() as f64
    };
    Ok(Some(CycleMetrics {
        critic_loss,
        actor_objective,
    }))
}
