use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::geometry::{centroid, Position};
use crate::task::NodeId;

use super::{Cluster, ClusterConfig, ClusterState};

#[derive(Debug, Clone, Default)]
pub struct KMeansReport {
    /// Objective after every assignment pass, initial pass first.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Lloyd centroids at termination, one per cluster in head order.
    pub centroids: Vec<Position>,
}

/// Sum of squared distances of each point to its assigned centroid.
pub fn squared_objective(positions: &[Position], assignment: &[usize], centroids: &[Position]) -> f64 {
    positions
        .iter()
        .zip(assignment)
        .map(|(p, &a)| p.distance_sq(&centroids[a]))
        .sum()
}

fn nearest(p: &Position, centroids: &[Position]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// D²-weighted seeding from the given stream.
fn seed_centroids<R: Rng + ?Sized>(positions: &[Position], k: usize, rng: &mut R) -> Vec<Position> {
    let mut chosen = vec![rng.random_range(0..positions.len())];
    let mut dist: Vec<f64> = positions
        .iter()
        .map(|p| p.distance_sq(&positions[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // all remaining points coincide with a chosen one
            (0..positions.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in positions.iter().enumerate() {
            dist[i] = dist[i].min(p.distance_sq(&positions[next]));
        }
    }
    chosen.into_iter().map(|i| positions[i]).collect()
}

/// Moves the centroid of every empty cluster onto the point farthest from
/// its current centroid, taken from a cluster that can spare it.
fn reseed_empty(positions: &[Position], assignment: &mut [usize], centroids: &mut [Position]) {
    loop {
        let mut sizes = vec![0usize; centroids.len()];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let far = (0..positions.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .max_by(|&a, &b| {
                let da = positions[a].distance_sq(&centroids[assignment[a]]);
                let db = positions[b].distance_sq(&centroids[assignment[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with two members");
        centroids[empty] = positions[far];
        assignment[far] = empty;
    }
}

/// Lloyd's algorithm on UAV positions. `positions[i]` is node `i`.
///
/// The head of each cluster is the member nearest the member mean, with
/// ties going to the lowest node id. The returned clusters are sorted by
/// head id.
pub fn kmeans_cluster<R: Rng + ?Sized>(
    positions: &[Position],
    k: usize,
    rng: &mut R,
    cfg: &ClusterConfig,
) -> (ClusterState, KMeansReport) {
    let n = positions.len();
    assert!(k >= 1 && k <= n, "k = {k} must lie in 1..={n}");

    let mut centroids = seed_centroids(positions, k, rng);
    let mut assignment: Vec<usize> = positions.iter().map(|p| nearest(p, &centroids)).collect();
    reseed_empty(positions, &mut assignment, &mut centroids);
    let mut report = KMeansReport::default();
    report
        .objective_history
        .push(squared_objective(positions, &assignment, &centroids));

    for _ in 0..cfg.kmeans_max_iters {
        report.iterations += 1;
        let mut shift: f64 = 0.0;
        for (c, slot) in centroids.iter_mut().enumerate() {
            let mean = centroid(
                positions
                    .iter()
                    .zip(&assignment)
                    .filter(|(_, &a)| a == c)
                    .map(|(p, _)| p),
            )
            .expect("clusters are non-empty after reseeding");
            shift = shift.max(slot.distance(&mean));
            *slot = mean;
        }
        for (a, p) in assignment.iter_mut().zip(positions) {
            *a = nearest(p, &centroids);
        }
        reseed_empty(positions, &mut assignment, &mut centroids);
        report
            .objective_history
            .push(squared_objective(positions, &assignment, &centroids));
        if shift < cfg.kmeans_tolerance {
            report.converged = true;
            break;
        }
    }

    let mut members: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].insert(i);
    }
    let mut clusters: Vec<(Cluster, Position)> = members
        .into_iter()
        .zip(&centroids)
        .map(|(m, &lloyd)| {
            let center = centroid(m.iter().map(|&i| &positions[i])).expect("non-empty cluster");
            let head = closest_member(&m, positions, &center);
            (
                Cluster {
                    head,
                    members: m,
                    centroid: center,
                },
                lloyd,
            )
        })
        .collect();
    clusters.sort_by_key(|(c, _)| c.head);
    report.centroids = clusters.iter().map(|(_, l)| *l).collect();

    let head_offcenter: BTreeMap<NodeId, u32> = clusters.iter().map(|(c, _)| (c.head, 0)).collect();
    let state = ClusterState {
        clusters: clusters.into_iter().map(|(c, _)| c).collect(),
        isolated: BTreeSet::new(),
        head_offcenter,
    };
    (state, report)
}

/// Member nearest `center`; ties go to the lowest id.
pub(super) fn closest_member(members: &BTreeSet<NodeId>, positions: &[Position], center: &Position) -> NodeId {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    // BTreeSet iterates in id order, so strict < keeps the lowest id on ties
    for &m in members {
        let d = positions[m].distance_sq(center);
        if d < best_d {
            best = Some(m);
            best_d = d;
        }
    }
    best.expect("cluster has at least one member")
}
