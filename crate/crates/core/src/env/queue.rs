//! Per-device non-preemptive priority queues and serialized UAV uplinks.

use serde::{Deserialize, Serialize};

use crate::link::{computing_delay, transmission_delay, ComputeDevice, DeviceId};
use crate::task::{task_profit, NodeId, ProfitParams, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationReason {
    /// The chosen device had no usable link.
    Unreachable,
    /// Service would have started too late to meet the deadline.
    DeadlineDrop,
    /// Still waiting at a slot boundary with no way to finish in time.
    Expired,
}

impl ViolationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationReason::Unreachable => "unreachable",
            ViolationReason::DeadlineDrop => "deadline_drop",
            ViolationReason::Expired => "expired",
        }
    }
}

/// Final fate of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub task: Task,
    pub device: DeviceId,
    pub priority: f64,
    /// Slot in which the fate was decided.
    pub slot: u64,
    pub queueing: f64,
    pub transmission: f64,
    pub computing: f64,
    /// Completion time minus release time; zero for violations.
    pub total: f64,
    /// Zero unless the task finished on time.
    pub profit: f64,
    pub violation: Option<ViolationReason>,
}

impl Resolution {
    pub fn on_time(&self) -> bool {
        self.violation.is_none()
    }

    fn violated(job: &Job, slot: u64, reason: ViolationReason) -> Self {
        Self {
            task: job.task,
            device: job.device,
            priority: job.priority,
            slot,
            queueing: 0.0,
            transmission: job.transmission,
            computing: 0.0,
            total: 0.0,
            profit: 0.0,
            violation: Some(reason),
        }
    }
}

/// A task admitted to a device, possibly still in flight on the uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub task: Task,
    pub device: DeviceId,
    pub priority: f64,
    /// Time the task was released at its UAV.
    pub release: f64,
    /// Time the last bit reaches the device.
    pub arrival: f64,
    pub transmission: f64,
    pub profit: f64,
}

impl Job {
    fn deadline_ok(&self, finish: f64) -> bool {
        finish - self.release <= self.task.deadline
    }

    /// Sort key: higher priority first, then earlier slot, then lower id.
    fn precedes(&self, other: &Job) -> bool {
        if self.priority != other.priority {
            return self.priority > other.priority;
        }
        if self.task.arrival_slot != other.task.arrival_slot {
            return self.task.arrival_slot < other.task.arrival_slot;
        }
        self.task.id < other.task.id
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InService {
    job: Job,
    start: f64,
    finish: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceQueue {
    pub device: ComputeDevice,
    /// Sorted by priority descending, then arrival slot, then task id.
    pending: Vec<Job>,
    in_service: Option<InService>,
    /// The device is idle from this instant on unless a task is in service.
    pub busy_until: f64,
    /// Cycles of every task completed so far.
    pub utilized_cycles: f64,
}

impl DeviceQueue {
    pub fn new(device: ComputeDevice) -> Self {
        Self {
            device,
            pending: Vec::new(),
            in_service: None,
            busy_until: 0.0,
            utilized_cycles: 0.0,
        }
    }

    pub fn pending(&self) -> &[Job] {
        &self.pending
    }

    pub fn len(&self) -> usize {
        self.pending.len() + usize::from(self.in_service.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, job: Job) {
        let at = self
            .pending
            .iter()
            .position(|p| job.precedes(p))
            .unwrap_or(self.pending.len());
        self.pending.insert(at, job);
    }

    /// Cycles still owed at `now`: the in-service remainder plus all pending.
    pub fn backlog_cycles(&self, now: f64) -> f64 {
        let running = self.in_service.as_ref().map_or(0.0, |s| {
            (s.finish - now.max(s.start)).max(0.0) * self.device.capacity_hz
        });
        running + self.pending.iter().map(|j| j.task.workload()).sum::<f64>()
    }

    /// Seconds of work queued ahead of a newcomer at `now`.
    pub fn backlog_seconds(&self, now: f64) -> f64 {
        self.backlog_cycles(now) / self.device.capacity_hz
    }

    /// Executes every event strictly before `t_end`; completions at exactly
    /// `t_end` are included.
    pub fn run_until(&mut self, t_end: f64, slot: u64, out: &mut Vec<Resolution>) {
        loop {
            if let Some(s) = &self.in_service {
                if s.finish > t_end {
                    return;
                }
                let s = self.in_service.take().expect("checked above");
                self.utilized_cycles += s.job.task.workload();
                out.push(self.completion(s, slot));
            }
            let Some(earliest) = self
                .pending
                .iter()
                .map(|j| j.arrival)
                .min_by(f64::total_cmp)
            else {
                return;
            };
            let start = self.busy_until.max(earliest);
            if start >= t_end {
                return;
            }
            let pick = self
                .pending
                .iter()
                .position(|j| j.arrival <= start)
                .expect("the earliest arrival is eligible");
            let job = self.pending.remove(pick);
            self.busy_until = start;
            let finish = start + computing_delay(&job.task, &self.device);
            if !job.deadline_ok(finish) {
                out.push(Resolution::violated(&job, slot, ViolationReason::DeadlineDrop));
                continue;
            }
            self.busy_until = finish;
            self.in_service = Some(InService { job, start, finish });
        }
    }

    /// Removes waiting tasks that cannot finish in time even if served at
    /// the earliest possible instant after `t_end`.
    pub fn sweep_expired(&mut self, t_end: f64, slot: u64, out: &mut Vec<Resolution>) {
        let device = self.device;
        self.pending.retain(|job| {
            let finish = job.arrival.max(t_end) + computing_delay(&job.task, &device);
            if job.deadline_ok(finish) {
                true
            } else {
                out.push(Resolution::violated(job, slot, ViolationReason::Expired));
                false
            }
        });
    }

    fn completion(&self, s: InService, slot: u64) -> Resolution {
        let computing = s.finish - s.start;
        let total = s.finish - s.job.release;
        Resolution {
            task: s.job.task,
            device: s.job.device,
            priority: s.job.priority,
            slot,
            queueing: (total - s.job.transmission - computing).max(0.0),
            transmission: s.job.transmission,
            computing,
            total,
            profit: s.job.profit,
            violation: None,
        }
    }

    pub fn clear(&mut self) {
        self.pending.clear();
        self.in_service = None;
        self.busy_until = 0.0;
        self.utilized_cycles = 0.0;
    }
}

/// One offloading decision ready for admission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub task: Task,
    pub device: DeviceId,
    pub priority: f64,
    /// Uplink rate to the device at decision time; ignored for local runs.
    pub rate: f64,
    pub distance: f64,
    pub release: f64,
}

/// All device queues of one environment plus each UAV's uplink.
///
/// Queue layout: one local queue per UAV, then base stations, then the
/// satellite.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    pub queues: Vec<DeviceQueue>,
    /// Instant each UAV's radio becomes free.
    pub uplink_free: Vec<f64>,
    n_uavs: usize,
    n_bs: usize,
}

impl Scheduler {
    pub fn new(locals: Vec<ComputeDevice>, base_stations: &[ComputeDevice], satellite: ComputeDevice) -> Self {
        let n_uavs = locals.len();
        let n_bs = base_stations.len();
        let mut queues: Vec<_> = locals.into_iter().map(DeviceQueue::new).collect();
        queues.extend(base_stations.iter().copied().map(DeviceQueue::new));
        queues.push(DeviceQueue::new(satellite));
        Self {
            queues,
            uplink_free: vec![0.0; n_uavs],
            n_uavs,
            n_bs,
        }
    }

    pub fn queue_index(&self, device: DeviceId, origin: NodeId) -> usize {
        queue_index(device, origin, self.n_uavs, self.n_bs)
    }

    /// Admits a task: it occupies the origin's uplink, then joins the
    /// device queue at its arrival instant. Unreachable targets resolve
    /// immediately.
    pub fn admit(&mut self, adm: Admission, slot: u64, profit: &ProfitParams, out: &mut Vec<Resolution>) {
        let origin = adm.task.origin_uav;
        let mut job = Job {
            task: adm.task,
            device: adm.device,
            priority: adm.priority,
            release: adm.release,
            arrival: adm.release,
            transmission: 0.0,
            profit: task_profit(&adm.task, profit),
        };
        if adm.device.is_remote() {
            let Ok(transmission) = transmission_delay(&adm.task, adm.rate, adm.device, adm.distance) else {
                out.push(Resolution::violated(&job, slot, ViolationReason::Unreachable));
                return;
            };
            let upload_start = self.uplink_free[origin].max(adm.release);
            self.uplink_free[origin] = upload_start + adm.task.data_bits / adm.rate;
            job.arrival = upload_start + transmission;
            job.transmission = transmission;
        }
        let q = self.queue_index(adm.device, origin);
        self.queues[q].insert(job);
    }

    pub fn advance(&mut self, t_end: f64, slot: u64, out: &mut Vec<Resolution>) {
        for q in &mut self.queues {
            q.run_until(t_end, slot, out);
            q.sweep_expired(t_end, slot, out);
        }
    }

    pub fn unfinished(&self) -> usize {
        self.queues.iter().map(DeviceQueue::len).sum()
    }

    pub fn clear(&mut self) {
        self.queues.iter_mut().for_each(DeviceQueue::clear);
        self.uplink_free.iter_mut().for_each(|t| *t = 0.0);
    }
}

pub fn queue_index(device: DeviceId, origin: NodeId, n_uavs: usize, n_bs: usize) -> usize {
    match device {
        DeviceId::Local => origin,
        DeviceId::BaseStation(b) => n_uavs + b - 1,
        DeviceId::Satellite => n_uavs + n_bs,
    }
}
