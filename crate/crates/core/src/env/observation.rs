//! What a cluster head sees when deciding one member's task.

use serde::{Deserialize, Serialize};

use super::topology::{link_rate, LinkState, Topology};
use super::EnvConfig;
use crate::clustering::ClusterState;
use crate::error::{Error, Result};
use crate::mobility::MobilityState;
use crate::task::{NodeId, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Hz available to the cluster at each base station, then its share of
    /// the satellite.
    pub resources: Vec<f64>,
    /// x, y, z, heading, speed of the UAV that owns the task.
    pub mobility: [f64; 5],
    /// Uplink rate from that UAV to each base station, then the satellite.
    pub rates: Vec<f64>,
    /// Size in bits, cycles per bit, deadline in seconds.
    pub task: [f64; 3],
}

impl Observation {
    pub fn dim(n_bs: usize) -> usize {
        2 * (n_bs + 1) + 5 + 3
    }

    /// Appends the scaled feature vector to `out`.
    pub fn write_features(&self, scale: &ObservationScale, out: &mut Vec<f64>) {
        let n = self.resources.len();
        for (i, r) in self.resources.iter().enumerate() {
            let max = if i + 1 == n { scale.satellite_capacity } else { scale.bs_capacity };
            out.push(r / max);
        }
        let m = &self.mobility;
        out.extend([
            m[0] / scale.side,
            m[1] / scale.side,
            m[2] / scale.altitude,
            m[3] / std::f64::consts::TAU,
            m[4] / scale.speed,
        ]);
        for (i, r) in self.rates.iter().enumerate() {
            let max = if i + 1 == n { scale.satellite_rate } else { scale.bs_rate };
            out.push(r / max);
        }
        out.extend([
            self.task[0] / scale.data_bits,
            self.task[1] / scale.cycles_per_bit,
            self.task[2] / scale.deadline,
        ]);
    }

    pub fn features(&self, scale: &ObservationScale) -> Vec<f64> {
        let mut out = Vec::with_capacity(Observation::dim(self.resources.len() - 1));
        self.write_features(scale, &mut out);
        out
    }
}

/// Per-field maxima used to scale observations for the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationScale {
    pub bs_capacity: f64,
    pub satellite_capacity: f64,
    pub side: f64,
    pub altitude: f64,
    pub speed: f64,
    /// Rate at the closest possible distance without shadowing.
    pub bs_rate: f64,
    pub satellite_rate: f64,
    pub data_bits: f64,
    pub cycles_per_bit: f64,
    pub deadline: f64,
}

impl ObservationScale {
    pub fn new(cfg: &EnvConfig, workload_scale: f64) -> Self {
        let alt = cfg.mobility.uav_altitude.max(1.0);
        let bits = cfg.task_size_range;
        let deadline = cfg.deadline_range[1].max(cfg.tight_deadline).max(1.0);
        Self {
            bs_capacity: cfg.bs_capacity_range[1] * 1e9,
            satellite_capacity: cfg.satellite_capacity * 1e9,
            side: cfg.area_side,
            altitude: alt,
            speed: (cfg.mobility.speed_mean + 3.0 * cfg.mobility.speed_std).max(1.0),
            bs_rate: link_rate(alt, &cfg.bs_channel, 0.0),
            satellite_rate: link_rate(cfg.satellite_altitude - alt, &cfg.satellite_channel, 0.0),
            data_bits: bits[1] * 1e6,
            cycles_per_bit: cfg.workload_range[1] * workload_scale / bits[0].max(1e-9),
            deadline: deadline * 1e-3,
        }
    }
}

/// Compute capacity each cluster may count on: the base stations within
/// coverage of its centroid, split evenly among all clusters covering the
/// same station, plus an even share of the satellite.
pub fn cluster_resources(topo: &Topology, clusters: &ClusterState) -> Vec<Vec<f64>> {
    let covers: Vec<Vec<bool>> = clusters
        .clusters
        .iter()
        .map(|c| {
            topo.base_stations
                .iter()
                .map(|bs| c.centroid.distance(&bs.position) <= topo.coverage_radius)
                .collect()
        })
        .collect();
    let sharing: Vec<usize> = (0..topo.n_bs())
        .map(|b| covers.iter().filter(|c| c[b]).count())
        .collect();
    let sat_share = topo.satellite.capacity_hz / clusters.cluster_count().max(1) as f64;
    covers
        .iter()
        .map(|cov| {
            let mut r: Vec<f64> = topo
                .base_stations
                .iter()
                .enumerate()
                .map(|(b, bs)| if cov[b] { bs.capacity_hz / sharing[b] as f64 } else { 0.0 })
                .collect();
            r.push(sat_share);
            r
        })
        .collect()
}

/// Observation of `head` for a task owned by `member`.
pub fn build_observation(
    topo: &Topology,
    clusters: &ClusterState,
    head: NodeId,
    member: &MobilityState,
    member_id: NodeId,
    links: &[LinkState],
    task: &Task,
) -> Result<Observation> {
    let idx = clusters
        .clusters
        .iter()
        .position(|c| c.head == head)
        .ok_or_else(|| Error::contract(format!("{head} is not a cluster head")))?;
    if !clusters.clusters[idx].members.contains(&member_id) {
        return Err(Error::contract(format!(
            "uav {member_id} is not in the cluster of head {head}"
        )));
    }
    let resources = cluster_resources(topo, clusters).swap_remove(idx);
    Ok(Observation {
        resources,
        mobility: [
            member.position.x,
            member.position.y,
            member.position.z,
            member.heading,
            member.speed,
        ],
        rates: links.iter().map(|l| l.rate).collect(),
        task: [task.data_bits, task.cycles_per_bit, task.deadline],
    })
}
