//! Dynamic UAV clustering.
//!
//! A centralized phase picks the cluster count from a logistic coverage
//! model and seeds clusters with K-Means; a distributed maintenance phase
//! then runs every slot, moving members between heads and re-electing a
//! head once it has been off-center for `reelect_threshold` slots.

mod coverage;
mod kmeans;
mod maintenance;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::task::NodeId;

pub use coverage::{
    coverage_probability, expected_cluster_size, max_coverage_probability, optimal_cluster_count,
    uniform_coverage, ClusterCount,
};
pub use kmeans::{kmeans_cluster, squared_objective, KMeansReport};
pub use maintenance::maintenance_step;
pub use snapshot::{parse_snapshot, write_snapshot, SnapshotLine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// UAV communication radius, meters.
    pub comm_radius: f64,
    /// Logistic steepness, 1/meters.
    pub logistic_steepness: f64,
    /// Target coverage probability used to pick the cluster count.
    pub coverage_threshold: f64,
    /// Slots between centralized re-clustering.
    pub recluster_period: u64,
    /// Consecutive off-center slots before a head is replaced.
    pub reelect_threshold: u32,
    pub kmeans_max_iters: usize,
    /// Meters of centroid movement below which Lloyd iterations stop.
    pub kmeans_tolerance: f64,
    /// Coverage probability under which a member counts as unreachable.
    pub isolation_floor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            comm_radius: 1000.0,
            logistic_steepness: 0.01,
            coverage_threshold: 0.9,
            recluster_period: 50,
            reelect_threshold: 5,
            kmeans_max_iters: 100,
            kmeans_tolerance: 1e-3,
            isolation_floor: 1e-3,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(format!("clustering.{k}"), m));
        if !(self.comm_radius > 0.0) {
            return bad("comm_radius", "must be positive");
        }
        if !(self.logistic_steepness > 0.0) {
            return bad("logistic_steepness", "must be positive");
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold < 1.0) {
            return bad("coverage_threshold", "must lie in (0, 1)");
        }
        if self.recluster_period == 0 {
            return bad("recluster_period", "must be at least 1");
        }
        if self.reelect_threshold == 0 {
            return bad("reelect_threshold", "must be at least 1");
        }
        if self.kmeans_max_iters == 0 {
            return bad("kmeans_max_iters", "must be at least 1");
        }
        if !(self.kmeans_tolerance >= 0.0) {
            return bad("kmeans_tolerance", "must be non-negative");
        }
        if !(self.isolation_floor > 0.0 && self.isolation_floor < 1.0) {
            return bad("isolation_floor", "must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub head: NodeId,
    /// Includes the head.
    pub members: BTreeSet<NodeId>,
    pub centroid: Position,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Kept sorted by head id; this is the canonical agent order.
    pub clusters: Vec<Cluster>,
    pub isolated: BTreeSet<NodeId>,
    pub head_offcenter: BTreeMap<NodeId, u32>,
}

impl ClusterState {
    /// Every UAV is its own head. Used by schedulers without clustering.
    pub fn singletons(positions: &[Position]) -> Self {
        let clusters = positions
            .iter()
            .enumerate()
            .map(|(id, p)| Cluster {
                head: id,
                members: BTreeSet::from([id]),
                centroid: *p,
            })
            .collect();
        let head_offcenter = (0..positions.len()).map(|id| (id, 0)).collect();
        Self {
            clusters,
            isolated: BTreeSet::new(),
            head_offcenter,
        }
    }

    pub fn heads(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.clusters.iter().map(|c| c.head)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Index of the cluster containing `node`, if it is not isolated.
    pub fn cluster_of(&self, node: NodeId) -> Option<usize> {
        self.clusters.iter().position(|c| c.members.contains(&node))
    }

    pub fn is_head(&self, node: NodeId) -> bool {
        self.clusters.iter().any(|c| c.head == node)
    }

    pub(crate) fn sort_by_head(&mut self) {
        self.clusters.sort_by_key(|c| c.head);
    }

    /// Checks the membership invariants against `n_uavs` nodes.
    pub fn check_partition(&self, n_uavs: usize) -> Result<()> {
        let mut seen = vec![false; n_uavs];
        let mut mark = |id: NodeId| -> Result<()> {
            match seen.get_mut(id) {
                Some(s) if !*s => {
                    *s = true;
                    Ok(())
                }
                Some(_) => Err(Error::contract(format!("node {id} assigned twice"))),
                None => Err(Error::contract(format!("unknown node {id}"))),
            }
        };
        let mut heads = BTreeSet::new();
        for c in &self.clusters {
            if !c.members.contains(&c.head) {
                return Err(Error::contract(format!("head {} not in its cluster", c.head)));
            }
            if !heads.insert(c.head) {
                return Err(Error::contract(format!("duplicate head {}", c.head)));
            }
            for &m in &c.members {
                mark(m)?;
            }
        }
        for &i in &self.isolated {
            mark(i)?;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::contract(format!("node {missing} unassigned")));
        }
        if self.head_offcenter.keys().any(|k| !heads.contains(k)) {
            return Err(Error::contract("off-center counter for a non-head"));
        }
        Ok(())
    }
}

/// Message exchanged by the maintenance protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaintenanceEvent {
    HeadBroadcast {
        head: NodeId,
        position: Position,
        timestamp: u64,
    },
    JoinRequest {
        member: NodeId,
        head: NodeId,
    },
    LeaveNotice {
        member: NodeId,
        head: NodeId,
    },
    HeadReplaced {
        old: NodeId,
        new: NodeId,
    },
    Isolated {
        member: NodeId,
    },
}

/// True on slots where the centralized clustering phase runs.
pub fn should_recluster(slot: u64, cfg: &ClusterConfig) -> bool {
    slot.is_multiple_of(cfg.recluster_period)
}
