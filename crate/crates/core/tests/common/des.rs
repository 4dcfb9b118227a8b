//! Brute-force discrete-event model of uplinks and device queues.
//!
//! Every job is known up front. Each device is simulated on its own in
//! continuous time: when it frees up it serves the best job that has
//! arrived and is still alive, where a waiting job dies at the first slot
//! boundary from which it could no longer finish in time.

use std::collections::BTreeMap;

use sagin_sched::{DeviceId, Task, TaskId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub task: Task,
    pub device: DeviceId,
    pub priority: f64,
    /// Uplink rate and distance seen at decision time.
    pub rate: f64,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Micro {
    pub n_uavs: usize,
    pub n_bs: usize,
    pub slot_seconds: f64,
    pub episode_slots: u64,
    pub sensitivity: f64,
    pub local_hz: f64,
    pub bs_hz: Vec<f64>,
    pub sat_hz: f64,
    /// Decisions of every slot, in task id order.
    pub slots: Vec<Vec<Decision>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fate {
    OnTime { slot: u64, total: f64, transmission: f64, profit: f64 },
    Dropped { slot: u64 },
    Expired { slot: u64 },
    Unreachable { slot: u64 },
    Unfinished,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub fates: BTreeMap<TaskId, Fate>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Job {
    d: Decision,
    release: f64,
    arrival: f64,
    transmission: f64,
    compute: f64,
    priority: f64,
    /// Instant the job leaves the waiting line unserved.
    expires: f64,
    expire_slot: u64,
}

impl Micro {
    fn boundary(&self, b: u64) -> f64 {
        b as f64 * self.slot_seconds
    }

    /// Slot whose half-open interval contains `t`.
    fn slot_at(&self, t: f64) -> u64 {
        (0..).find(|&s| t < self.boundary(s + 1)).unwrap()
    }

    /// First slot whose end is at or after `t`.
    fn slot_ending_by(&self, t: f64) -> u64 {
        (0..).find(|&s| t <= self.boundary(s + 1)).unwrap()
    }

    fn queue(&self, device: DeviceId, origin: usize) -> usize {
        match device {
            DeviceId::Local => origin,
            DeviceId::BaseStation(b) => self.n_uavs + b - 1,
            DeviceId::Satellite => self.n_uavs + self.n_bs,
        }
    }

    fn hz(&self, device: DeviceId) -> f64 {
        match device {
            DeviceId::Local => self.local_hz,
            DeviceId::BaseStation(b) => self.bs_hz[b - 1],
            DeviceId::Satellite => self.sat_hz,
        }
    }

    pub fn simulate(&self) -> Outcome {
        let end = self.boundary(self.episode_slots);
        let mut out = Outcome {
            rewards: vec![0.0; self.episode_slots as usize],
            ..Outcome::default()
        };
        let mut uplink = vec![0.0f64; self.n_uavs];
        let mut queues: Vec<Vec<Job>> = vec![Vec::new(); self.n_uavs + self.n_bs + 1];

        for (s, decisions) in self.slots.iter().enumerate() {
            let release = s as f64 * self.slot_seconds;
            for d in decisions {
                let t = d.task;
                let remote = d.device != DeviceId::Local;
                if remote && !(d.rate > 0.0) {
                    out.fates.insert(t.id, Fate::Unreachable { slot: s as u64 });
                    continue;
                }
                let (arrival, transmission) = if remote {
                    let start = uplink[t.origin_uav].max(release);
                    uplink[t.origin_uav] = start + t.data_bits / d.rate;
                    let sat = d.device == DeviceId::Satellite;
                    let tx = t.data_bits / d.rate + if sat { d.distance / 299_792_458.0 } else { 0.0 };
                    (start + tx, tx)
                } else {
                    (release, 0.0)
                };
                let compute = t.data_bits * t.cycles_per_bit / self.hz(d.device);
                let mut job = Job {
                    d: *d,
                    release,
                    arrival,
                    transmission,
                    compute,
                    priority: d.priority.clamp(0.0, 1.0),
                    expires: f64::INFINITY,
                    expire_slot: 0,
                };
                for b in (s as u64 + 1)..=self.episode_slots {
                    let tb = self.boundary(b);
                    if arrival.max(tb) + compute - release > t.deadline {
                        job.expires = tb;
                        job.expire_slot = b - 1;
                        break;
                    }
                }
                queues[self.queue(d.device, t.origin_uav)].push(job);
            }
        }

        let mut completions: Vec<(u64, usize, f64, f64)> = Vec::new();
        for (qi, jobs) in queues.iter().enumerate() {
            let mut done = vec![false; jobs.len()];
            let mut free = 0.0f64;
            loop {
                let next = jobs
                    .iter()
                    .enumerate()
                    .filter(|(i, j)| !done[*i] && j.expires > free.max(j.arrival))
                    .map(|(_, j)| free.max(j.arrival))
                    .min_by(f64::total_cmp);
                let Some(t) = next else { break };
                if t >= end {
                    break;
                }
                let best = jobs
                    .iter()
                    .enumerate()
                    .filter(|(i, j)| !done[*i] && j.arrival <= t && j.expires > t)
                    .min_by(|(_, a), (_, b)| {
                        b.priority
                            .total_cmp(&a.priority)
                            .then(a.d.task.arrival_slot.cmp(&b.d.task.arrival_slot))
                            .then(a.d.task.id.cmp(&b.d.task.id))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                done[best] = true;
                let j = &jobs[best];
                let finish = t + j.compute;
                let id = j.d.task.id;
                if finish - j.release > j.d.task.deadline {
                    out.fates.insert(id, Fate::Dropped { slot: self.slot_at(t) });
                    free = t;
                    continue;
                }
                free = finish;
                if finish > end {
                    out.fates.insert(id, Fate::Unfinished);
                    continue;
                }
                let slot = self.slot_ending_by(finish);
                let profit = j.d.task.data_bits * j.d.task.cycles_per_bit
                    * (-self.sensitivity * j.d.task.deadline).exp();
                out.fates.insert(
                    id,
                    Fate::OnTime {
                        slot,
                        total: finish - j.release,
                        transmission: j.transmission,
                        profit,
                    },
                );
                completions.push((slot, qi, finish, profit));
            }
            for (i, j) in jobs.iter().enumerate() {
                if !done[i] {
                    let fate = if j.expires.is_finite() {
                        Fate::Expired { slot: j.expire_slot }
                    } else {
                        Fate::Unfinished
                    };
                    out.fates.insert(j.d.task.id, fate);
                }
            }
        }
        // the reward of a slot adds device by device, each in finishing order
        completions.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        let mut per_slot: Vec<Vec<f64>> = vec![Vec::new(); self.episode_slots as usize];
        for (slot, _, _, p) in completions {
            per_slot[slot as usize].push(p);
        }
        for (s, ps) in per_slot.into_iter().enumerate() {
            out.rewards[s] = ps.into_iter().sum();
        }
        out
    }
}
