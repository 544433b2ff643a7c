//! Uplink radio model: device placement, channel gains and per-sub-channel
//! Shannon rates.

use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Distance-dependent path loss `reference_loss_db + slope·log10(d/reference_distance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoss {
    pub reference_loss_db: f64,
    /// Loss per decade of distance (10× the path-loss exponent).
    pub slope_db_per_decade: f64,
    pub reference_distance_m: f64,
}

impl Default for PathLoss {
    /// 128.1 + 37.6·log10(d / 1 km).
    fn default() -> Self {
        Self { reference_loss_db: 128.1, slope_db_per_decade: 37.6, reference_distance_m: 1000.0 }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.reference_loss_db + self.slope_db_per_decade * (distance_m / self.reference_distance_m).log10()
    }

    /// Linear power gain at `distance_m`.
    pub fn gain(&self, distance_m: f64) -> f64 {
        10f64.powf(-self.loss_db(distance_m) / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Unit-mean exponential power draw, independent per sub-channel and round.
    #[default]
    Rayleigh,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub subchannel_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub path_loss: PathLoss,
    pub fading: Fading,
    /// Distances below this are evaluated at this value.
    pub min_distance_m: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            subchannel_bandwidth_hz: 180_000.0,
            noise_psd_dbm_hz: -174.0,
            path_loss: PathLoss::default(),
            fading: Fading::Rayleigh,
            min_distance_m: 1.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.subchannel_bandwidth_hz > 0.0 && self.subchannel_bandwidth_hz.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sub-channel bandwidth must be positive, got {}",
                self.subchannel_bandwidth_hz
            )));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::InvalidParams("transmit power and noise density must be finite".into()));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::InvalidParams("minimum distance must be positive".into()));
        }
        Ok(())
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Thermal noise power over one sub-channel, `N0·B`, in watts.
    pub fn noise_power_watts(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.subchannel_bandwidth_hz
    }

    pub fn snr(&self, gain: f64) -> f64 {
        self.tx_power_watts() * gain / self.noise_power_watts()
    }

    /// Path-loss gain for a device `distance_m` from the base station.
    pub fn path_gain(&self, distance_m: f64) -> f64 {
        self.path_loss.gain(distance_m.max(self.min_distance_m))
    }
}

/// Shannon rate `B·log2(1 + P·gain/(B·N0))` in bit/s.
pub fn rate(link: &LinkBudget, gain: f64) -> f64 {
    link.subchannel_bandwidth_hz * link.snr(gain).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Devices scattered over a disc centred on the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub cell_radius: f64,
    pub positions: Vec<Point>,
}

impl Topology {
    pub fn device_count(&self) -> usize {
        self.positions.len()
    }

    pub fn distance(&self, device: usize) -> f64 {
        self.positions[device].norm()
    }
}

/// Places `devices` points uniformly over the disc of radius `radius`.
pub fn sample_topology<R: Rng + ?Sized>(rng: &mut R, devices: usize, radius: f64) -> Topology {
    let positions = (0..devices)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            Point { x: r * theta.cos(), y: r * theta.sin() }
        })
        .collect();
    Topology { cell_radius: radius, positions }
}

/// Power gain `|h|²` of one device on one sub-channel.
pub fn channel_gain<R: Rng + ?Sized>(
    topology: &Topology,
    link: &LinkBudget,
    device: usize,
    rng: &mut R,
) -> f64 {
    let path = link.path_gain(topology.distance(device));
    match link.fading {
        Fading::Rayleigh => path * rng.sample::<f64, _>(Exp1),
        Fading::None => path,
    }
}

/// Achievable rates `c[k][s]` of every device on every sub-channel for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub round: u64,
    devices: usize,
    subchannels: usize,
    rates: Vec<f64>,
}

impl RateTable {
    /// Builds a table from row-major rates; every entry must be positive and finite.
    pub fn from_rows(round: u64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let devices = rows.len();
        let subchannels = rows.first().map_or(0, Vec::len);
        if devices == 0 || subchannels == 0 || rows.iter().any(|r| r.len() != subchannels) {
            return Err(Error::InvalidParams("rate table rows must be non-empty and equal length".into()));
        }
        for (device, row) in rows.iter().enumerate() {
            if row.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return Err(Error::ZeroRate { device });
            }
        }
        Ok(Self { round, devices, subchannels, rates: rows.concat() })
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    #[inline]
    pub fn get(&self, device: usize, subchannel: usize) -> f64 {
        self.rates[device * self.subchannels + subchannel]
    }

    pub fn row(&self, device: usize) -> &[f64] {
        &self.rates[device * self.subchannels..(device + 1) * self.subchannels]
    }

    /// Dumps the table with header `device,subchannel,rate_bps`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = report::writer(path)?;
        let io = |source| Error::Csv { path: path.to_path_buf(), source };
        w.write_record(["device", "subchannel", "rate_bps"]).map_err(io)?;
        for k in 0..self.devices {
            for s in 0..self.subchannels {
                w.write_record([k.to_string(), s.to_string(), report::fmt_f64(self.get(k, s))])
                    .map_err(io)?;
            }
        }
        report::finish(w, path)
    }
}

/// Draws one round of rates: fading is independent per (device, sub-channel)
/// and drawn in device-major order from `rng`.
pub fn rate_table<R: Rng + ?Sized>(
    topology: &Topology,
    link: &LinkBudget,
    subchannels: usize,
    round: u64,
    rng: &mut R,
) -> Result<RateTable> {
    link.validate()?;
    if subchannels == 0 {
        return Err(Error::InvalidParams("at least one sub-channel required".into()));
    }
    let devices = topology.device_count();
    let mut rates = Vec::with_capacity(devices * subchannels);
    for k in 0..devices {
        for _ in 0..subchannels {
            let c = rate(link, channel_gain(topology, link, k, rng));
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::ZeroRate { device: k });
            }
            rates.push(c);
        }
    }
    Ok(RateTable { round, devices, subchannels, rates })
}
