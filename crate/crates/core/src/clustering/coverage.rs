use crate::geometry::Position;

use super::ClusterConfig;

/// Logistic coverage probability `1 / (1 + exp(ζ (d − R)))`, decreasing in
/// the UAV-to-head distance `d` and equal to 1/2 at the radius `R`.
pub fn coverage_probability(uav: &Position, head: &Position, cfg: &ClusterConfig) -> f64 {
    let z = cfg.logistic_steepness * (uav.distance(head) - cfg.comm_radius);
    // evaluate on the side that cannot overflow
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Expected number of UAVs covered by a head.
pub fn expected_cluster_size(members: &[Position], head: &Position, cfg: &ClusterConfig) -> f64 {
    members
        .iter()
        .map(|p| coverage_probability(p, head, cfg))
        .sum()
}

/// Probability that at least one head covers the UAV.
pub fn max_coverage_probability(uav: &Position, heads: &[Position], cfg: &ClusterConfig) -> f64 {
    let miss: f64 = heads
        .iter()
        .map(|h| 1.0 - coverage_probability(uav, h, cfg))
        .product();
    1.0 - miss
}

/// Coverage reached by `clusters` heads under the uniform-density model,
/// where each head covers a fraction `πR²/area` of the UAVs.
pub fn uniform_coverage(clusters: usize, n_uavs: usize, area_m2: f64, cfg: &ClusterConfig) -> f64 {
    let share = covered_share(n_uavs, area_m2, cfg);
    1.0 - (1.0 - share).powi(clusters as i32)
}

fn covered_share(n_uavs: usize, area_m2: f64, cfg: &ClusterConfig) -> f64 {
    let density = n_uavs as f64 / area_m2;
    density * std::f64::consts::PI * cfg.comm_radius * cfg.comm_radius / n_uavs as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterCount {
    pub count: usize,
    /// Set when one head's disc already covers the whole area.
    pub degenerate: bool,
}

/// Smallest cluster count whose uniform-model coverage reaches the
/// configured threshold, `ceil(ln(1 − P) / ln(1 − κπR²/N))`, clamped to
/// `[1, n_uavs]`.
pub fn optimal_cluster_count(n_uavs: usize, area_m2: f64, cfg: &ClusterConfig) -> ClusterCount {
    assert!(n_uavs >= 1, "cluster count needs at least one UAV");
    let share = covered_share(n_uavs, area_m2, cfg);
    if share >= 1.0 {
        return ClusterCount {
            count: 1,
            degenerate: true,
        };
    }
    let raw = (1.0 - cfg.coverage_threshold).ln() / (1.0 - share).ln();
    let mut count = if raw.is_finite() {
        raw.ceil().clamp(1.0, n_uavs as f64) as usize
    } else {
        n_uavs
    };
    // The closed form can land one off when `raw` is within rounding of an
    // integer; settle on the exact minimal count under the same predicate.
    let reaches = |c: usize| 1.0 - (1.0 - share).powi(c as i32) >= cfg.coverage_threshold;
    while count > 1 && reaches(count - 1) {
        count -= 1;
    }
    while count < n_uavs && !reaches(count) {
        count += 1;
    }
    ClusterCount {
        count,
        degenerate: false,
    }
}
