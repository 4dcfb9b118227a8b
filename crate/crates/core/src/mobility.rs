//! Random-direction UAV mobility with bounded per-slot turns.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Area, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityState {
    pub position: Position,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
    /// Meters per second, constant within a slot.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Maximum heading change per slot, radians.
    pub max_turn: f64,
    pub uav_altitude: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            speed_mean: 10.0,
            speed_std: 2.0,
            max_turn: PI / 6.0,
            uav_altitude: 100.0,
        }
    }
}

/// Draws an episode speed from `Normal(mean, std)`, clamped at zero.
pub fn draw_speed<R: Rng + ?Sized>(cfg: &MobilityConfig, rng: &mut R) -> f64 {
    if cfg.speed_std <= 0.0 {
        return cfg.speed_mean.max(0.0);
    }
    let normal = Normal::new(cfg.speed_mean, cfg.speed_std).expect("std checked positive");
    normal.sample(rng).max(0.0)
}

pub fn normalize_heading(h: f64) -> f64 {
    let r = h.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Moves the UAV one slot along its heading, reflecting at the area
/// boundary, then perturbs the heading by a uniform draw in
/// `[-max_turn, max_turn]`. Speed is left unchanged.
pub fn advance_mobility<R: Rng + ?Sized>(
    state: &MobilityState,
    slot_seconds: f64,
    max_turn: f64,
    area: &Area,
    rng: &mut R,
) -> MobilityState {
    debug_assert!(slot_seconds > 0.0);
    let step = state.speed * slot_seconds;
    let mut x = state.position.x + step * state.heading.cos();
    let mut y = state.position.y + step * state.heading.sin();
    let mut heading = state.heading;

    // the loop handles steps longer than the area side
    let side = area.side;
    while !(0.0..=side).contains(&x) {
        x = if x < 0.0 { -x } else { 2.0 * side - x };
        heading = PI - heading;
    }
    while !(0.0..=side).contains(&y) {
        y = if y < 0.0 { -y } else { 2.0 * side - y };
        heading = -heading;
    }

    let turn = if max_turn > 0.0 {
        rng.random_range(-max_turn..=max_turn)
    } else {
        0.0
    };
    MobilityState {
        position: Position::new(x, y, state.position.z),
        heading: normalize_heading(heading + turn),
        speed: state.speed,
    }
}
