//! Static placement of base stations and the satellite, and per-slot links.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EnvConfig;
use crate::geometry::{Area, Position};
use crate::link::{data_rate, path_loss_db, ChannelParams, ComputeDevice, DeviceId};
use crate::mobility::MobilityState;

const GHZ: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub area: Area,
    /// `base_stations[b]` has id `BaseStation(b + 1)`.
    pub base_stations: Vec<ComputeDevice>,
    pub satellite: ComputeDevice,
    pub local_capacity: f64,
    /// Maximum UAV to base-station distance for a usable link.
    pub coverage_radius: f64,
}

impl Topology {
    /// Base stations sit at the cell centers of a near-square grid, filled
    /// row by row; capacities are uniform over the configured range. The
    /// satellite hovers over the area center.
    pub fn build<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Self {
        let area = Area::new(cfg.area_side);
        let n = cfg.n_bs;
        let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
        let rows = n.div_ceil(cols).max(1);
        let (w, h) = (cfg.area_side / cols as f64, cfg.area_side / rows as f64);
        let [lo, hi] = cfg.bs_capacity_range;
        let base_stations = (0..n)
            .map(|b| {
                let (r, c) = (b / cols, b % cols);
                let capacity = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                ComputeDevice {
                    id: DeviceId::BaseStation(b + 1),
                    position: Position::new((c as f64 + 0.5) * w, (r as f64 + 0.5) * h, 0.0),
                    capacity_hz: capacity * GHZ,
                }
            })
            .collect();
        let satellite = ComputeDevice {
            id: DeviceId::Satellite,
            position: area.center(cfg.satellite_altitude),
            capacity_hz: cfg.satellite_capacity * GHZ,
        };
        Self {
            area,
            base_stations,
            satellite,
            local_capacity: cfg.local_capacity * GHZ,
            coverage_radius: cfg.bs_coverage_radius,
        }
    }

    pub fn n_bs(&self) -> usize {
        self.base_stations.len()
    }

    /// Remote devices in action order: base stations, then the satellite.
    pub fn remote(&self) -> impl Iterator<Item = &ComputeDevice> {
        self.base_stations.iter().chain(std::iter::once(&self.satellite))
    }

    pub fn local_device(&self, uav: &MobilityState) -> ComputeDevice {
        ComputeDevice {
            id: DeviceId::Local,
            position: uav.position,
            capacity_hz: self.local_capacity,
        }
    }

    /// Capacity of a device as seen from a given UAV.
    pub fn capacity(&self, device: DeviceId) -> f64 {
        match device {
            DeviceId::Local => self.local_capacity,
            DeviceId::BaseStation(b) => self.base_stations[b - 1].capacity_hz,
            DeviceId::Satellite => self.satellite.capacity_hz,
        }
    }
}

/// Distance and achievable rate from one UAV to every remote device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub distance: f64,
    /// Zero when the device is out of range.
    pub rate: f64,
}

/// Link states of every UAV for one slot, `links[uav][remote index]`.
pub fn draw_links<R: Rng + ?Sized>(
    topo: &Topology,
    uavs: &[MobilityState],
    bs_channel: &ChannelParams,
    sat_channel: &ChannelParams,
    deterministic: bool,
    rng: &mut R,
) -> Vec<Vec<LinkState>> {
    let shadow = |sigma: f64, rng: &mut R| -> f64 {
        if deterministic || sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma).expect("sigma checked").sample(rng)
    };
    uavs.iter()
        .map(|u| {
            topo.remote()
                .map(|dev| {
                    let (params, in_range) = match dev.id {
                        DeviceId::Satellite => (sat_channel, true),
                        _ => (bs_channel, u.position.distance(&dev.position) <= topo.coverage_radius),
                    };
                    // drawn even out of range so the stream layout never shifts
                    let x = shadow(params.shadowing_sigma_db, rng);
                    let distance = u.position.distance(&dev.position);
                    let rate = if in_range {
                        link_rate(distance, params, x)
                    } else {
                        0.0
                    };
                    LinkState { distance, rate }
                })
                .collect()
        })
        .collect()
}

pub fn link_rate(distance: f64, params: &ChannelParams, shadowing: f64) -> f64 {
    // co-located endpoints get the reference loss
    let d = distance.max(params.reference_distance);
    let pl = path_loss_db(d, params, shadowing).expect("distance clamped positive");
    data_rate(pl, params)
}
