use crate::geometry::{centroid, Position};
use crate::task::NodeId;

use super::kmeans::closest_member;
use super::{coverage_probability, ClusterConfig, ClusterState, MaintenanceEvent};

/// One slot of the distributed maintenance protocol.
///
/// Members (and isolated UAVs) follow the head with the highest coverage
/// probability, switching only on a strict improvement; a UAV whose best
/// probability falls under the isolation floor becomes isolated. Each head
/// then recomputes its cluster center and hands over to the member closest
/// to it once it has been off-center for `reelect_threshold` consecutive
/// slots.
pub fn maintenance_step(
    state: &ClusterState,
    positions: &[Position],
    slot: u64,
    cfg: &ClusterConfig,
) -> (ClusterState, Vec<MaintenanceEvent>) {
    let mut next = state.clone();
    let mut events = Vec::new();
    let heads: Vec<NodeId> = next.heads().collect();

    for uav in 0..positions.len() {
        if heads.contains(&uav) {
            continue;
        }
        let current = next.cluster_of(uav);
        let probs: Vec<f64> = heads
            .iter()
            .map(|&h| coverage_probability(&positions[uav], &positions[h], cfg))
            .collect();
        // heads are sorted, so the first maximum is the lowest id
        let best = probs
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (i, &p)| match acc {
                Some((_, bp)) if bp >= p => acc,
                _ => Some((i, p)),
            });

        match (current, best) {
            (_, None) => {
                // no heads at all
                if let Some(c) = current {
                    leave(&mut next, &mut events, uav, c);
                }
                isolate(&mut next, &mut events, uav);
            }
            (Some(c), Some((_, bp))) if bp < cfg.isolation_floor => {
                leave(&mut next, &mut events, uav, c);
                isolate(&mut next, &mut events, uav);
            }
            (None, Some((_, bp))) if bp < cfg.isolation_floor => {
                isolate(&mut next, &mut events, uav);
            }
            (Some(c), Some((bi, bp))) => {
                let own = heads
                    .iter()
                    .position(|&h| h == next.clusters[c].head)
                    .expect("cluster head is listed");
                if bi != own && bp > probs[own] {
                    leave(&mut next, &mut events, uav, c);
                    join(&mut next, &mut events, uav, bi);
                }
            }
            (None, Some((bi, _))) => {
                next.isolated.remove(&uav);
                join(&mut next, &mut events, uav, bi);
            }
        }
    }

    for cluster in next.clusters.iter_mut() {
        let center = centroid(cluster.members.iter().map(|&m| &positions[m]))
            .expect("cluster keeps its head");
        cluster.centroid = center;
        let closest = closest_member(&cluster.members, positions, &center);
        let counter = next.head_offcenter.entry(cluster.head).or_insert(0);
        if closest == cluster.head {
            *counter = 0;
            continue;
        }
        *counter += 1;
        if *counter >= cfg.reelect_threshold {
            let old = cluster.head;
            next.head_offcenter.remove(&old);
            next.head_offcenter.insert(closest, 0);
            cluster.head = closest;
            events.push(MaintenanceEvent::HeadReplaced { old, new: closest });
            events.push(MaintenanceEvent::HeadBroadcast {
                head: closest,
                position: positions[closest],
                timestamp: slot,
            });
        }
    }
    next.sort_by_head();
    (next, events)
}

fn leave(state: &mut ClusterState, events: &mut Vec<MaintenanceEvent>, uav: NodeId, cluster: usize) {
    let c = &mut state.clusters[cluster];
    c.members.remove(&uav);
    events.push(MaintenanceEvent::LeaveNotice {
        member: uav,
        head: c.head,
    });
}

fn join(state: &mut ClusterState, events: &mut Vec<MaintenanceEvent>, uav: NodeId, cluster: usize) {
    let c = &mut state.clusters[cluster];
    c.members.insert(uav);
    events.push(MaintenanceEvent::JoinRequest {
        member: uav,
        head: c.head,
    });
}

fn isolate(state: &mut ClusterState, events: &mut Vec<MaintenanceEvent>, uav: NodeId) {
    if state.isolated.insert(uav) {
        events.push(MaintenanceEvent::Isolated { member: uav });
    }
}
