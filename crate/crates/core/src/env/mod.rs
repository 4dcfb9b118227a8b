//! Slotted environment: arrivals, uplinks, device queues, reward, audit.
//!
//! Each slot the environment surfaces the tasks released at its start. The
//! driver answers every task with an [`Action`], after which uploads and
//! device queues run until the slot ends. The step reward is the profit of
//! tasks that finished on time during the slot.

mod audit;
mod observation;
mod queue;
mod spawn;
mod topology;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterState;
use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::link::{computing_delay, propagation_delay, ChannelParams, DeviceId};
use crate::mobility::{advance_mobility, draw_speed, MobilityConfig, MobilityState};
use crate::rng::{stream, stream_indexed, SimRng, Stream};
use crate::task::{NodeId, ProfitParams, Task, TaskId};

pub use audit::{
    audit_constraints, write_trace, AuditReport, DecisionRecord, EpisodeTrace, LoadRecord, TRACE_HEADER,
};
pub use observation::{build_observation, cluster_resources, Observation, ObservationScale};
pub use queue::{queue_index, Admission, DeviceQueue, Job, Resolution, Scheduler, ViolationReason};
pub use spawn::{spawn_tasks, Scenario, ScenarioPreset};
pub use topology::{draw_links, link_rate, LinkState, Topology};

/// Physical configuration. Capacities are in GHz, task sizes in Mbit,
/// workloads in Mcycles and deadlines in ms; everything else is SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Side of the square area, meters.
    pub area_side: f64,
    pub n_bs: usize,
    pub n_uavs: usize,
    pub bs_capacity_range: [f64; 2],
    /// Meters from a base station within which a UAV can reach it.
    pub bs_coverage_radius: f64,
    pub satellite_capacity: f64,
    pub satellite_altitude: f64,
    pub local_capacity: f64,
    /// Tasks per second over the whole network.
    pub arrival_rate: f64,
    pub slot_seconds: f64,
    pub episode_slots: u64,
    pub task_size_range: [f64; 2],
    pub workload_range: [f64; 2],
    pub deadline_range: [f64; 2],
    /// Upper deadline, ms, of tasks drawn as delay sensitive.
    pub tight_deadline: f64,
    pub profit: ProfitParams,
    pub mobility: MobilityConfig,
    pub bs_channel: ChannelParams,
    pub satellite_channel: ChannelParams,
    /// Disables shadowing.
    pub deterministic_channel: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            area_side: 5000.0,
            n_bs: 25,
            n_uavs: 40,
            bs_capacity_range: [20.0, 40.0],
            bs_coverage_radius: 1000.0,
            satellite_capacity: 100.0,
            satellite_altitude: 780e3,
            local_capacity: 2.0,
            arrival_rate: 25.0,
            slot_seconds: 0.1,
            episode_slots: 200,
            task_size_range: [10.0, 90.0],
            workload_range: [1000.0, 3000.0],
            deadline_range: [0.0, 200.0],
            tight_deadline: 20.0,
            profit: ProfitParams::default(),
            mobility: MobilityConfig::default(),
            bs_channel: ChannelParams::base_station(),
            satellite_channel: ChannelParams::satellite(),
            deterministic_channel: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(k, m));
        let positive = [
            ("area_side", self.area_side),
            ("bs_coverage_radius", self.bs_coverage_radius),
            ("satellite_capacity", self.satellite_capacity),
            ("satellite_altitude", self.satellite_altitude),
            ("local_capacity", self.local_capacity),
            ("slot_seconds", self.slot_seconds),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, "must be positive");
            }
        }
        if self.n_uavs == 0 {
            return bad("n_uavs", "must be at least 1");
        }
        if self.episode_slots == 0 {
            return bad("episode_slots", "must be at least 1");
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad("arrival_rate", "must be non-negative");
        }
        let ranges = [
            ("bs_capacity_range", self.bs_capacity_range, true),
            ("task_size_range", self.task_size_range, true),
            ("workload_range", self.workload_range, true),
            ("deadline_range", self.deadline_range, false),
        ];
        for (k, [lo, hi], strict) in ranges {
            let lo_ok = if strict { lo > 0.0 } else { lo >= 0.0 };
            if !(lo_ok && hi >= lo && hi.is_finite()) {
                return bad(k, "must be an ordered pair of positive values");
            }
        }
        if !(self.tight_deadline >= 0.0) {
            return bad("tight_deadline", "must be non-negative");
        }
        if !(self.profit.delay_sensitivity >= 0.0) {
            return bad("profit.delay_sensitivity", "must be non-negative");
        }
        let m = &self.mobility;
        if !(m.speed_mean >= 0.0 && m.speed_std >= 0.0 && m.max_turn >= 0.0 && m.uav_altitude >= 0.0) {
            return bad("mobility", "speeds, turn and altitude must be non-negative");
        }
        self.bs_channel.validate("bs_channel")?;
        self.satellite_channel.validate("satellite_channel")?;
        Ok(())
    }

    /// Number of destinations: local, every base station, the satellite.
    pub fn n_devices(&self) -> usize {
        self.n_bs + 2
    }
}

/// A head's decision for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub device: DeviceId,
    /// Queue priority in `[0, 1]`; higher is served first.
    pub priority: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    pub agent: NodeId,
    pub task: TaskId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub slot: u64,
    /// On-time profit of everything that finished during the slot.
    pub reward: f64,
    pub resolutions: Vec<Resolution>,
    pub done: bool,
}

impl StepOutcome {
    pub fn completed(&self) -> impl Iterator<Item = &Resolution> {
        self.resolutions.iter().filter(|r| r.on_time())
    }

    pub fn violated(&self) -> impl Iterator<Item = (TaskId, ViolationReason)> + '_ {
        self.resolutions
            .iter()
            .filter_map(|r| r.violation.map(|v| (r.task.id, v)))
    }
}

/// Queue state frozen at a slot start, used for delay estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSnapshot {
    /// Seconds of queued work per scheduler queue.
    pub backlog: Vec<f64>,
    /// Seconds until each UAV's uplink is free.
    pub uplink_wait: Vec<f64>,
}

pub struct Env {
    cfg: EnvConfig,
    scenario: ScenarioPreset,
    profit: ProfitParams,
    seed: u64,
    topology: Topology,
    uavs: Vec<MobilityState>,
    links: Vec<Vec<LinkState>>,
    scheduler: Scheduler,
    slot: u64,
    done: bool,
    pending: Vec<Task>,
    next_id: TaskId,
    mobility_rng: SimRng,
    task_rng: SimRng,
    shadow_rng: SimRng,
    trace: EpisodeTrace,
    scale: ObservationScale,
}

impl Env {
    /// Builds the base-station layout from `seed` and resets to episode 0.
    pub fn new(cfg: EnvConfig, scenario: ScenarioPreset, seed: u64) -> Result<Self> {
        cfg.validate()?;
        scenario.validate()?;
        let topology = Topology::build(&cfg, &mut stream(seed, Stream::Topology));
        let locals = vec![topology.local_device(&idle_uav()); cfg.n_uavs];
        let scheduler = Scheduler::new(locals, &topology.base_stations, topology.satellite);
        let profit = ProfitParams {
            delay_sensitivity: cfg.profit.delay_sensitivity * scenario.delay_weight_scale,
        };
        let scale = ObservationScale::new(&cfg, scenario.workload_scale);
        let mut env = Self {
            scenario,
            profit,
            seed,
            topology,
            uavs: Vec::new(),
            links: Vec::new(),
            scheduler,
            slot: 0,
            done: false,
            pending: Vec::new(),
            next_id: 0,
            mobility_rng: stream(seed, Stream::Mobility),
            task_rng: stream(seed, Stream::Tasks),
            shadow_rng: stream(seed, Stream::Shadowing),
            trace: EpisodeTrace::default(),
            scale,
            cfg,
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts a fresh episode: new UAV placement and speeds, empty queues,
    /// and the first slot's arrivals. Task ids keep increasing across
    /// episodes.
    pub fn reset(&mut self, episode: u64) {
        self.mobility_rng = stream_indexed(self.seed, Stream::Mobility, episode);
        self.task_rng = stream_indexed(self.seed, Stream::Tasks, episode);
        self.shadow_rng = stream_indexed(self.seed, Stream::Shadowing, episode);
        let side = self.cfg.area_side;
        let alt = self.cfg.mobility.uav_altitude;
        let rng = &mut self.mobility_rng;
        self.uavs = (0..self.cfg.n_uavs)
            .map(|_| {
                let position = Position::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side), alt);
                let heading = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = draw_speed(&self.cfg.mobility, rng);
                MobilityState {
                    position,
                    heading,
                    speed,
                }
            })
            .collect();
        self.scheduler.clear();
        self.slot = 0;
        self.done = false;
        self.trace = EpisodeTrace {
            n_uavs: self.cfg.n_uavs,
            n_bs: self.cfg.n_bs,
            profit: Some(self.profit),
            ..EpisodeTrace::default()
        };
        self.refresh_links();
        self.spawn();
    }

    fn refresh_links(&mut self) {
        self.links = draw_links(
            &self.topology,
            &self.uavs,
            &self.cfg.bs_channel,
            &self.cfg.satellite_channel,
            self.cfg.deterministic_channel,
            &mut self.shadow_rng,
        );
    }

    fn spawn(&mut self) {
        self.pending = spawn_tasks(self.slot, &mut self.task_rng, &self.cfg, &self.scenario, &mut self.next_id);
        self.trace.spawned.push(self.pending.len());
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn profit_params(&self) -> &ProfitParams {
        &self.profit
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn scale(&self) -> &ObservationScale {
        &self.scale
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Tasks released at the current slot start, in id order.
    pub fn pending_tasks(&self) -> &[Task] {
        &self.pending
    }

    pub fn uavs(&self) -> &[MobilityState] {
        &self.uavs
    }

    pub fn uav_positions(&self) -> Vec<Position> {
        self.uavs.iter().map(|u| u.position).collect()
    }

    pub fn links(&self, uav: NodeId) -> &[LinkState] {
        &self.links[uav]
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn slot_start(&self) -> f64 {
        self.slot as f64 * self.cfg.slot_seconds
    }

    pub fn observe(&self, clusters: &ClusterState, head: NodeId, task: &Task) -> Result<Observation> {
        let m = task.origin_uav;
        build_observation(&self.topology, clusters, head, &self.uavs[m], m, &self.links[m], task)
    }

    pub fn queue_snapshot(&self) -> QueueSnapshot {
        let now = self.slot_start();
        QueueSnapshot {
            backlog: self.scheduler.queues.iter().map(|q| q.backlog_seconds(now)).collect(),
            uplink_wait: self.scheduler.uplink_free.iter().map(|&t| (t - now).max(0.0)).collect(),
        }
    }

    /// Estimated completion delay of `task` on each destination in action
    /// order, or `None` when the link is down.
    pub fn estimate_delays(&self, task: &Task, snap: &QueueSnapshot) -> Vec<Option<f64>> {
        let n_bs = self.cfg.n_bs;
        (0..self.cfg.n_devices())
            .map(|a| {
                let device = DeviceId::from_action_index(a, n_bs).expect("index in range");
                self.estimate_delay(task, device, snap)
            })
            .collect()
    }

    fn estimate_delay(&self, task: &Task, device: DeviceId, snap: &QueueSnapshot) -> Option<f64> {
        let origin = task.origin_uav;
        let q = self.scheduler.queue_index(device, origin);
        let compute = computing_delay(task, &self.scheduler.queues[q].device);
        if device == DeviceId::Local {
            return Some(snap.backlog[q] + compute);
        }
        let link = self.links[origin][device.action_index(self.cfg.n_bs) - 1];
        if !(link.rate > 0.0) {
            return None;
        }
        let upload = task.data_bits / link.rate + propagation_delay(device, link.distance);
        Some(snap.uplink_wait[origin] + upload + snap.backlog[q] + compute)
    }

    /// Books a tentative choice into `snap` so later estimates in the same
    /// slot see it.
    pub fn commit_estimate(&self, task: &Task, device: DeviceId, snap: &mut QueueSnapshot) {
        let origin = task.origin_uav;
        let q = self.scheduler.queue_index(device, origin);
        if device.is_remote() {
            let link = self.links[origin][device.action_index(self.cfg.n_bs) - 1];
            if link.rate > 0.0 {
                snap.uplink_wait[origin] += task.data_bits / link.rate;
            }
        }
        snap.backlog[q] += computing_delay(task, &self.scheduler.queues[q].device);
    }

    /// Executes one slot. Every pending task must be acted on exactly once.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::contract("step called on a finished episode"));
        }
        let mut by_task: BTreeMap<TaskId, &AgentAction> = BTreeMap::new();
        for a in actions {
            if by_task.insert(a.task, a).is_some() {
                return Err(Error::contract(format!("task {} acted on twice", a.task)));
            }
            if !a.action.priority.is_finite() {
                return Err(Error::NonFinite(format!("priority of task {}", a.task)));
            }
            if let DeviceId::BaseStation(b) = a.action.device {
                if b == 0 || b > self.cfg.n_bs {
                    return Err(Error::contract(format!("unknown base station {b}")));
                }
            }
        }
        if by_task.len() != self.pending.len() || self.pending.iter().any(|t| !by_task.contains_key(&t.id)) {
            return Err(Error::contract(format!(
                "actions cover {} tasks, slot {} has {} pending",
                by_task.len(),
                self.slot,
                self.pending.len()
            )));
        }

        let slot = self.slot;
        let start = self.slot_start();
        let t_end = (slot + 1) as f64 * self.cfg.slot_seconds;
        let n_bs = self.cfg.n_bs;
        let mut admitted: BTreeMap<usize, f64> = BTreeMap::new();
        let mut out = Vec::new();
        let pending = std::mem::take(&mut self.pending);
        for task in &pending {
            let a = by_task[&task.id];
            let device = a.action.device;
            let priority = a.action.priority.clamp(0.0, 1.0);
            let mut alpha = vec![0u8; self.cfg.n_devices()];
            alpha[device.action_index(n_bs)] = 1;
            self.trace.decisions.push(DecisionRecord {
                slot,
                task: *task,
                agent: a.agent,
                alpha,
                priority,
            });
            let link = match device {
                DeviceId::Local => LinkState {
                    distance: 0.0,
                    rate: f64::INFINITY,
                },
                _ => self.links[task.origin_uav][device.action_index(n_bs) - 1],
            };
            let q = self.scheduler.queue_index(device, task.origin_uav);
            *admitted.entry(q).or_default() += task.workload();
            let adm = Admission {
                task: *task,
                device,
                priority,
                rate: link.rate,
                distance: link.distance,
                release: start,
            };
            self.scheduler.admit(adm, slot, &self.profit, &mut out);
        }
        for (q, cycles) in admitted {
            let dq = &self.scheduler.queues[q];
            let budget = dq.device.capacity_hz * self.cfg.slot_seconds - dq.backlog_cycles(start);
            self.trace.loads.push(LoadRecord {
                slot,
                queue: q,
                admitted_cycles: cycles,
                budget_cycles: budget,
            });
        }
        self.scheduler.advance(t_end, slot, &mut out);
        let reward: f64 = out.iter().filter(|r| r.on_time()).map(|r| r.profit).sum();
        self.trace.rewards.push(reward);
        self.trace.resolutions.extend(out.iter().cloned());

        self.slot += 1;
        if self.slot >= self.cfg.episode_slots {
            self.done = true;
            self.trace.unfinished = self.scheduler.unfinished();
        } else {
            let area = self.topology.area;
            for u in &mut self.uavs {
                *u = advance_mobility(u, self.cfg.slot_seconds, self.cfg.mobility.max_turn, &area, &mut self.mobility_rng);
            }
            self.refresh_links();
            self.spawn();
        }
        Ok(StepOutcome {
            slot,
            reward,
            resolutions: out,
            done: self.done,
        })
    }
}

fn idle_uav() -> MobilityState {
    MobilityState {
        position: Position::new(0.0, 0.0, 0.0),
        heading: 0.0,
        speed: 0.0,
    }
}
