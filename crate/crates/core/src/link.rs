//! Wireless link budget and the delay components of an offloaded task.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::task::Task;

pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Thermal noise density, dBm/Hz.
const NOISE_DENSITY_DBM_HZ: f64 = -174.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Hz.
    pub bandwidth: f64,
    /// Watts.
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Watts over the whole band.
    pub noise_power: f64,
    pub path_loss_exponent: f64,
    /// Meters.
    pub reference_distance: f64,
    /// Hz; sets the wavelength of the reference loss term.
    pub carrier_frequency: f64,
    /// Standard deviation of log-normal shadowing, dB.
    pub shadowing_sigma_db: f64,
}

impl ChannelParams {
    /// UAV to ground base station: 2.4 GHz, 100 MHz, 1 W, exponent 2.5.
    pub fn base_station() -> Self {
        let bandwidth = 100e6;
        Self {
            bandwidth,
            tx_power: 1.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
            noise_power: dbm_to_watts(NOISE_DENSITY_DBM_HZ) * bandwidth,
            path_loss_exponent: 2.5,
            reference_distance: 1.0,
            carrier_frequency: 2.4e9,
            shadowing_sigma_db: 2.0,
        }
    }

    /// UAV to LEO satellite: Ka band free space with directive antennas.
    pub fn satellite() -> Self {
        let bandwidth = 100e6;
        Self {
            bandwidth,
            tx_power: 10.0,
            tx_gain: db_to_linear(20.0),
            rx_gain: db_to_linear(40.0),
            noise_power: dbm_to_watts(NOISE_DENSITY_DBM_HZ) * bandwidth,
            path_loss_exponent: 2.0,
            reference_distance: 1.0,
            carrier_frequency: 20e9,
            shadowing_sigma_db: 1.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.carrier_frequency
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let positive = [
            ("bandwidth", self.bandwidth),
            ("tx_power", self.tx_power),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
            ("noise_power", self.noise_power),
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
            ("carrier_frequency", self.carrier_frequency),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{key}.{name}"), "must be positive"));
            }
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config(
                format!("{key}.shadowing_sigma_db"),
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// A compute destination: the UAV itself, a base station, or the satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceId {
    Local,
    /// 1-based base-station index.
    BaseStation(usize),
    Satellite,
}

impl DeviceId {
    /// Position in the action vector: Local, BS 1..=n, Satellite.
    pub fn action_index(&self, n_bs: usize) -> usize {
        match *self {
            DeviceId::Local => 0,
            DeviceId::BaseStation(i) => i,
            DeviceId::Satellite => n_bs + 1,
        }
    }

    pub fn from_action_index(index: usize, n_bs: usize) -> Option<Self> {
        match index {
            0 => Some(DeviceId::Local),
            i if i <= n_bs => Some(DeviceId::BaseStation(i)),
            i if i == n_bs + 1 => Some(DeviceId::Satellite),
            _ => None,
        }
    }

    pub fn is_remote(&self) -> bool {
        !matches!(self, DeviceId::Local)
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceId::Local => write!(f, "local"),
            DeviceId::BaseStation(i) => write!(f, "bs{i}"),
            DeviceId::Satellite => write!(f, "sat"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeDevice {
    pub id: DeviceId,
    pub position: Position,
    /// CPU cycles per second.
    pub capacity_hz: f64,
}

/// Log-distance path loss in dB with a free-space reference term.
///
/// Distances below the reference distance are clamped to it.
pub fn path_loss_db(distance: f64, params: &ChannelParams, shadowing_draw: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "path loss distance must be positive, got {distance}"
        )));
    }
    let d0 = params.reference_distance;
    let d = distance.max(d0);
    let reference = 20.0 * (4.0 * PI * d0 / params.wavelength()).log10();
    Ok(reference + 10.0 * params.path_loss_exponent * (d / d0).log10() + shadowing_draw)
}

/// Signal-to-noise ratio for a given loss, with the loss converted from dB.
pub fn snr(pl_db: f64, params: &ChannelParams) -> f64 {
    params.tx_power * params.tx_gain * params.rx_gain / (params.noise_power * db_to_linear(pl_db))
}

/// Shannon rate `B log2(1 + SNR)` in bits per second.
pub fn data_rate(pl_db: f64, params: &ChannelParams) -> f64 {
    let s = snr(pl_db, params);
    if s < 0.5 {
        // weak links: 1 + s would round away most of s
        params.bandwidth * s.ln_1p() / LN_2
    } else {
        params.bandwidth * (1.0 + s).log2()
    }
}

/// Only the satellite hop pays propagation delay.
pub fn propagation_delay(device: DeviceId, distance: f64) -> f64 {
    match device {
        DeviceId::Satellite => distance / LIGHT_SPEED,
        _ => 0.0,
    }
}

/// Upload time plus propagation. Local execution has no radio hop.
pub fn transmission_delay(task: &Task, rate: f64, device: DeviceId, distance: f64) -> Result<f64> {
    if device == DeviceId::Local {
        return Ok(0.0);
    }
    if !(rate > 0.0) {
        return Err(Error::Unreachable { rate });
    }
    Ok(task.data_bits / rate + propagation_delay(device, distance))
}

/// Total cycle demand divided by device speed.
pub fn computing_delay(task: &Task, device: &ComputeDevice) -> f64 {
    task.workload() / device.capacity_hz
}

pub fn total_delay(queueing: f64, transmission: f64, computing: f64) -> f64 {
    queueing + transmission + computing
}
