//! Problem instances: users stranded by a failed cell, the surviving ground
//! stations, the standby drone stations and the radio/power parameters.
//!
//! Everything stored here is SI (watts, seconds, meters, hertz). The only
//! exception is the noise spectral density, which is kept in dBm/Hz as it is
//! quoted and converted on demand by [`RadioParams::noise_power_w`]. Scenario
//! files use the customary units (minutes, milliwatts, GHz) and are converted
//! when read; see [`file`].

pub mod file;
pub mod generate;
pub mod regimes;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

pub use file::{load_scenario, parse_scenario, save_scenario, scenario_to_string};
pub use generate::{generate_random_scenario, GeneratorConfig, LoadProfile};
pub use regimes::{home_station, regime_scenario, Regime};

/// Wrapped I/O and TOML errors are exposed through `source()` rather than
/// repeated in the message.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("failed to access {path}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse scenario")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    /// Channel gain at the 1 m reference distance (unitless).
    pub rho0: f64,
    /// Path-loss exponent of the ground-to-user links.
    pub pathloss_exponent_gbs: f64,
    pub noise_psd_dbm_hz: f64,
    pub subchannel_bandwidth_hz: f64,
    /// Informational only.
    pub carrier_freq_hz: f64,
}

impl RadioParams {
    /// Receiver noise power over one sub-channel, in watts.
    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.subchannel_bandwidth_hz
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            rho0: 0.01,
            pathloss_exponent_gbs: 3.5,
            noise_psd_dbm_hz: -174.0,
            subchannel_bandwidth_hz: 180e3,
            carrier_freq_hz: 2.1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEquipment {
    pub id: u32,
    pub position: Point,
    /// Minimum rate in bps/Hz.
    pub rate_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation {
    pub id: u32,
    pub position: Point,
    pub height: f64,
    /// Transmit power per sub-channel, watts.
    pub per_subchannel_power: f64,
    pub alpha: f64,
    /// Power scaling while healing; never below `alpha`.
    pub alpha_tilde: f64,
    pub beta: f64,
    /// Own (non-stranded) users served in each time block.
    pub own_user_load: Vec<u32>,
    /// Rate budget in bps/Hz.
    pub max_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DronePowerParams {
    pub total_mass: f64,
    pub gravity: f64,
    pub air_density: f64,
    pub propeller_radius: f64,
    pub propeller_count: u32,
    pub v_max: f64,
    pub v_d: f64,
    pub p_full: f64,
    pub p_idle: f64,
}

impl Default for DronePowerParams {
    fn default() -> Self {
        Self {
            total_mass: 1.5,
            gravity: 9.81,
            air_density: 1.225,
            propeller_radius: 0.2,
            propeller_count: 4,
            v_max: 10.0,
            v_d: 10.0,
            p_full: 60.0,
            p_idle: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneStation {
    pub id: u32,
    pub initial_position: Point,
    pub altitude: f64,
    pub per_subchannel_power: f64,
    pub alpha: f64,
    pub beta: f64,
    pub power: DronePowerParams,
    pub max_rate: f64,
    pub box_min: Point,
    pub box_max: Point,
}

/// How the drone energy charges idle drones and travel time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DroneEnergyAccounting {
    /// The constant `beta` term is only charged while the drone is in use, and
    /// the travel energy is charged once per block in which the drone is
    /// switched on.
    #[default]
    Gated,
    /// Every drone pays `T * beta` in every block; travel energy is charged in
    /// every block the drone is in use.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<UserEquipment>,
    pub gbs: Vec<GroundStation>,
    pub dbs: Vec<DroneStation>,
    pub num_subchannels: usize,
    pub num_blocks: usize,
    /// Seconds.
    pub block_duration: f64,
    /// Seconds.
    pub flight_time: f64,
    pub radio: RadioParams,
    pub big_q: f64,
    /// Rate each of a ground station's own users occupies, bps/Hz.
    pub own_user_rate_threshold: f64,
    pub drone_energy: DroneEnergyAccounting,
}

/// Index-set sizes of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub users: usize,
    pub gbs: usize,
    pub dbs: usize,
    pub subchannels: usize,
    pub blocks: usize,
}

impl Scenario {
    pub fn dims(&self) -> Dims {
        Dims {
            users: self.users.len(),
            gbs: self.gbs.len(),
            dbs: self.dbs.len(),
            subchannels: self.num_subchannels,
            blocks: self.num_blocks,
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_gbs(&self) -> usize {
        self.gbs.len()
    }

    pub fn num_dbs(&self) -> usize {
        self.dbs.len()
    }

    pub fn noise_power(&self) -> f64 {
        self.radio.noise_power_w()
    }

    /// Checks every structural and physical invariant. The error message
    /// names the violated condition.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));

        if self.gbs.is_empty() {
            return bad("at least one ground station is required".into());
        }
        if self.dbs.is_empty() {
            return bad("at least one drone station is required".into());
        }
        if self.num_subchannels == 0 {
            return bad("num_subchannels must be at least 1".into());
        }
        if self.num_blocks == 0 {
            return bad("num_blocks must be at least 1".into());
        }
        if !(self.block_duration > 0.0 && self.block_duration.is_finite()) {
            return bad(format!("block duration must be > 0 (got {})", self.block_duration));
        }
        if !(self.flight_time >= 0.0 && self.flight_time.is_finite()) {
            return bad(format!("flight time must be >= 0 (got {})", self.flight_time));
        }
        let slots = (self.users.len() * self.num_subchannels) as f64;
        if !(self.big_q > slots) {
            return bad(format!(
                "big_q must exceed users x subchannels ({} <= {})",
                self.big_q, slots
            ));
        }
        if !(self.own_user_rate_threshold > 0.0) {
            return bad("own_user_rate_threshold must be > 0".into());
        }

        let r = &self.radio;
        if !(r.rho0 > 0.0) {
            return bad(format!("rho0 must be > 0 (got {})", r.rho0));
        }
        if !(r.pathloss_exponent_gbs >= 2.0) {
            return bad(format!(
                "pathloss_exponent_gbs must be >= 2 (got {})",
                r.pathloss_exponent_gbs
            ));
        }
        if !(r.subchannel_bandwidth_hz > 0.0) {
            return bad("subchannel_bandwidth must be > 0".into());
        }
        if !r.noise_psd_dbm_hz.is_finite() {
            return bad("noise_psd must be finite".into());
        }

        check_unique_ids("user", self.users.iter().map(|u| u.id))?;
        check_unique_ids("gbs", self.gbs.iter().map(|g| g.id))?;
        check_unique_ids("dbs", self.dbs.iter().map(|d| d.id))?;

        for u in &self.users {
            if !u.position.is_finite() {
                return bad(format!("user {}: position must be finite", u.id));
            }
            if !(u.rate_threshold > 0.0 && u.rate_threshold.is_finite()) {
                return bad(format!("user {}: rate_threshold must be > 0", u.id));
            }
        }

        for g in &self.gbs {
            if !g.position.is_finite() {
                return bad(format!("gbs {}: position must be finite", g.id));
            }
            if !(g.alpha_tilde >= g.alpha) {
                return bad(format!(
                    "gbs {}: alpha_l_tilde ≥ alpha_l violated ({} < {})",
                    g.id, g.alpha_tilde, g.alpha
                ));
            }
            if !(g.height > 0.0) {
                return bad(format!("gbs {}: height must be > 0", g.id));
            }
            if !(g.per_subchannel_power > 0.0) {
                return bad(format!("gbs {}: per_subchannel_power must be > 0", g.id));
            }
            if !(g.alpha >= 0.0 && g.beta >= 0.0) {
                return bad(format!("gbs {}: alpha and beta must be >= 0", g.id));
            }
            if !(g.max_rate > 0.0) {
                return bad(format!("gbs {}: max_rate must be > 0", g.id));
            }
            if g.own_user_load.len() != self.num_blocks {
                return bad(format!(
                    "gbs {}: own_user_load has {} entries, expected one per block ({})",
                    g.id,
                    g.own_user_load.len(),
                    self.num_blocks
                ));
            }
        }

        for d in &self.dbs {
            if !(d.altitude > 0.0) {
                return bad(format!("dbs {}: altitude must be > 0", d.id));
            }
            if !(d.per_subchannel_power > 0.0) {
                return bad(format!("dbs {}: per_subchannel_power must be > 0", d.id));
            }
            if !(d.alpha >= 0.0 && d.beta >= 0.0) {
                return bad(format!("dbs {}: alpha and beta must be >= 0", d.id));
            }
            if !(d.max_rate > 0.0) {
                return bad(format!("dbs {}: max_rate must be > 0", d.id));
            }
            if !(d.box_min.is_finite() && d.box_max.is_finite()) {
                return bad(format!("dbs {}: box must be finite", d.id));
            }
            if !(d.box_min.x <= d.box_max.x && d.box_min.y <= d.box_max.y) {
                return bad(format!("dbs {}: box_min <= box_max violated", d.id));
            }
            if !d.initial_position.within(d.box_min, d.box_max) {
                return bad(format!(
                    "dbs {}: initial position {} outside box",
                    d.id, d.initial_position
                ));
            }
            let p = &d.power;
            let positives = [
                ("total_mass", p.total_mass),
                ("gravity", p.gravity),
                ("air_density", p.air_density),
                ("propeller_radius", p.propeller_radius),
                ("propeller_count", p.propeller_count as f64),
                ("v_max", p.v_max),
                ("v_d", p.v_d),
                ("p_full", p.p_full),
                ("p_idle", p.p_idle),
            ];
            for (name, v) in positives {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("dbs {}: {} must be > 0", d.id, name));
                }
            }
            if p.v_d > p.v_max {
                return bad(format!("dbs {}: v_d <= v_max violated", d.id));
            }
        }
        Ok(())
    }
}

fn check_unique_ids(kind: &str, ids: impl Iterator<Item = u32>) -> Result<(), ScenarioError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScenarioError::Invalid(format!("duplicate {kind} id {id}")));
        }
    }
    Ok(())
}
