//! TOML scenario files.
//!
//! Files carry the customary units (minutes, milliwatts, GHz, dBm/Hz); every
//! missing key falls back to the standard parameter set, so a file listing only
//! user and station coordinates is complete. The full schema is documented in
//! `docs/scenario-format.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    DroneEnergyAccounting, DronePowerParams, DroneStation, GroundStation, RadioParams, Scenario, ScenarioError,
    UserEquipment,
};
use crate::geometry::Point;

const SECONDS_PER_MINUTE: f64 = 60.0;
const MW_PER_W: f64 = 1000.0;
const HZ_PER_GHZ: f64 = 1e9;

fn d_subchannels() -> usize {
    4
}
fn d_blocks() -> usize {
    2
}
fn d_block_min() -> f64 {
    60.0
}
fn d_flight_min() -> f64 {
    0.5
}
fn d_q() -> f64 {
    1000.0
}
fn d_rate_th() -> f64 {
    2.0
}
fn d_gbs_height() -> f64 {
    30.0
}
fn d_power_mw() -> f64 {
    100.0
}
fn d_alpha_l() -> f64 {
    4.7
}
fn d_beta_l() -> f64 {
    130.0
}
fn d_gbs_max_rate() -> f64 {
    100.0
}
fn d_altitude() -> f64 {
    100.0
}
fn d_alpha_d() -> f64 {
    2.6
}
fn d_beta_d() -> f64 {
    1.0
}
fn d_dbs_max_rate() -> f64 {
    10.0
}
fn d_box_min() -> [f64; 2] {
    [-200.0, -200.0]
}
fn d_box_max() -> [f64; 2] {
    [200.0, 200.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "d_subchannels")]
    num_subchannels: usize,
    #[serde(default = "d_blocks")]
    num_blocks: usize,
    #[serde(default = "d_block_min")]
    block_duration_min: f64,
    #[serde(default = "d_flight_min")]
    flight_time_min: f64,
    #[serde(default = "d_q")]
    big_q: f64,
    #[serde(default = "d_rate_th")]
    own_user_rate_threshold: f64,
    #[serde(default)]
    drone_energy: DroneEnergyAccounting,
    #[serde(default)]
    radio: RadioFile,
    #[serde(default)]
    users: Vec<UserFile>,
    #[serde(default)]
    gbs: Vec<GbsFile>,
    #[serde(default)]
    dbs: Vec<DbsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RadioFile {
    rho0: f64,
    pathloss_exponent_gbs: f64,
    noise_psd_dbm_hz: f64,
    subchannel_bandwidth_hz: f64,
    carrier_freq_ghz: f64,
}

impl Default for RadioFile {
    fn default() -> Self {
        RadioFile::from(&RadioParams::default())
    }
}

impl From<&RadioParams> for RadioFile {
    fn from(r: &RadioParams) -> Self {
        Self {
            rho0: r.rho0,
            pathloss_exponent_gbs: r.pathloss_exponent_gbs,
            noise_psd_dbm_hz: r.noise_psd_dbm_hz,
            subchannel_bandwidth_hz: r.subchannel_bandwidth_hz,
            carrier_freq_ghz: r.carrier_freq_hz / HZ_PER_GHZ,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    id: u32,
    x: f64,
    y: f64,
    #[serde(default = "d_rate_th")]
    rate_threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GbsFile {
    id: u32,
    x: f64,
    y: f64,
    #[serde(default = "d_gbs_height")]
    height_m: f64,
    #[serde(default = "d_power_mw")]
    subchannel_power_mw: f64,
    #[serde(default = "d_alpha_l")]
    alpha: f64,
    /// Defaults to 1.2 x alpha.
    #[serde(default)]
    alpha_tilde: Option<f64>,
    #[serde(default = "d_beta_l")]
    beta_w: f64,
    #[serde(default = "d_gbs_max_rate")]
    max_rate: f64,
    /// One entry per block; empty means no own users.
    #[serde(default)]
    own_user_load: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbsFile {
    id: u32,
    x: f64,
    y: f64,
    #[serde(default = "d_altitude")]
    altitude_m: f64,
    #[serde(default = "d_power_mw")]
    subchannel_power_mw: f64,
    #[serde(default = "d_alpha_d")]
    alpha: f64,
    #[serde(default = "d_beta_d")]
    beta_w: f64,
    #[serde(default = "d_dbs_max_rate")]
    max_rate: f64,
    #[serde(default = "d_box_min")]
    box_min: [f64; 2],
    #[serde(default = "d_box_max")]
    box_max: [f64; 2],
    #[serde(default)]
    power: DronePowerFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DronePowerFile {
    total_mass_kg: f64,
    gravity: f64,
    air_density: f64,
    propeller_radius_m: f64,
    propeller_count: u32,
    v_max: f64,
    v_d: f64,
    p_full_w: f64,
    p_idle_w: f64,
}

impl Default for DronePowerFile {
    fn default() -> Self {
        DronePowerFile::from(&DronePowerParams::default())
    }
}

impl From<&DronePowerParams> for DronePowerFile {
    fn from(p: &DronePowerParams) -> Self {
        Self {
            total_mass_kg: p.total_mass,
            gravity: p.gravity,
            air_density: p.air_density,
            propeller_radius_m: p.propeller_radius,
            propeller_count: p.propeller_count,
            v_max: p.v_max,
            v_d: p.v_d,
            p_full_w: p.p_full,
            p_idle_w: p.p_idle,
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Scenario {
        let num_blocks = self.num_blocks;
        let users = self
            .users
            .into_iter()
            .map(|u| UserEquipment {
                id: u.id,
                position: Point::new(u.x, u.y),
                rate_threshold: u.rate_threshold,
            })
            .collect();
        let gbs = self
            .gbs
            .into_iter()
            .map(|g| GroundStation {
                id: g.id,
                position: Point::new(g.x, g.y),
                height: g.height_m,
                per_subchannel_power: g.subchannel_power_mw / MW_PER_W,
                alpha: g.alpha,
                alpha_tilde: g.alpha_tilde.unwrap_or(1.2 * g.alpha),
                beta: g.beta_w,
                own_user_load: if g.own_user_load.is_empty() {
                    vec![0; num_blocks]
                } else {
                    g.own_user_load
                },
                max_rate: g.max_rate,
            })
            .collect();
        let dbs = self
            .dbs
            .into_iter()
            .map(|d| DroneStation {
                id: d.id,
                initial_position: Point::new(d.x, d.y),
                altitude: d.altitude_m,
                per_subchannel_power: d.subchannel_power_mw / MW_PER_W,
                alpha: d.alpha,
                beta: d.beta_w,
                power: DronePowerParams {
                    total_mass: d.power.total_mass_kg,
                    gravity: d.power.gravity,
                    air_density: d.power.air_density,
                    propeller_radius: d.power.propeller_radius_m,
                    propeller_count: d.power.propeller_count,
                    v_max: d.power.v_max,
                    v_d: d.power.v_d,
                    p_full: d.power.p_full_w,
                    p_idle: d.power.p_idle_w,
                },
                max_rate: d.max_rate,
                box_min: Point::new(d.box_min[0], d.box_min[1]),
                box_max: Point::new(d.box_max[0], d.box_max[1]),
            })
            .collect();
        Scenario {
            users,
            gbs,
            dbs,
            num_subchannels: self.num_subchannels,
            num_blocks,
            block_duration: self.block_duration_min * SECONDS_PER_MINUTE,
            flight_time: self.flight_time_min * SECONDS_PER_MINUTE,
            radio: RadioParams {
                rho0: self.radio.rho0,
                pathloss_exponent_gbs: self.radio.pathloss_exponent_gbs,
                noise_psd_dbm_hz: self.radio.noise_psd_dbm_hz,
                subchannel_bandwidth_hz: self.radio.subchannel_bandwidth_hz,
                carrier_freq_hz: self.radio.carrier_freq_ghz * HZ_PER_GHZ,
            },
            big_q: self.big_q,
            own_user_rate_threshold: self.own_user_rate_threshold,
            drone_energy: self.drone_energy,
        }
    }

    fn from_scenario(s: &Scenario) -> Self {
        Self {
            num_subchannels: s.num_subchannels,
            num_blocks: s.num_blocks,
            block_duration_min: s.block_duration / SECONDS_PER_MINUTE,
            flight_time_min: s.flight_time / SECONDS_PER_MINUTE,
            big_q: s.big_q,
            own_user_rate_threshold: s.own_user_rate_threshold,
            drone_energy: s.drone_energy,
            radio: RadioFile::from(&s.radio),
            users: s
                .users
                .iter()
                .map(|u| UserFile {
                    id: u.id,
                    x: u.position.x,
                    y: u.position.y,
                    rate_threshold: u.rate_threshold,
                })
                .collect(),
            gbs: s
                .gbs
                .iter()
                .map(|g| GbsFile {
                    id: g.id,
                    x: g.position.x,
                    y: g.position.y,
                    height_m: g.height,
                    subchannel_power_mw: g.per_subchannel_power * MW_PER_W,
                    alpha: g.alpha,
                    alpha_tilde: Some(g.alpha_tilde),
                    beta_w: g.beta,
                    max_rate: g.max_rate,
                    own_user_load: g.own_user_load.clone(),
                })
                .collect(),
            dbs: s
                .dbs
                .iter()
                .map(|d| DbsFile {
                    id: d.id,
                    x: d.initial_position.x,
                    y: d.initial_position.y,
                    altitude_m: d.altitude,
                    subchannel_power_mw: d.per_subchannel_power * MW_PER_W,
                    alpha: d.alpha,
                    beta_w: d.beta,
                    max_rate: d.max_rate,
                    box_min: [d.box_min.x, d.box_min.y],
                    box_max: [d.box_max.x, d.box_max.y],
                    power: DronePowerFile::from(&d.power),
                })
                .collect(),
        }
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    let scenario = file.into_scenario();
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    parse_scenario(&text)
}

pub fn scenario_to_string(scenario: &Scenario) -> Result<String, ScenarioError> {
    Ok(toml::to_string(&ScenarioFile::from_scenario(scenario))?)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let text = scenario_to_string(scenario)?;
    std::fs::write(path, text).map_err(|e| ScenarioError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
num_blocks = 1
num_subchannels = 1

[[users]]
id = 1
x = 10.0
y = -20.0

[[gbs]]
id = 1
x = 300.0
y = 0.0

[[dbs]]
id = 1
x = 0.0
y = 0.0
"#;

    #[test]
    fn missing_keys_take_standard_values() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.radio.rho0, 0.01);
        assert_eq!(s.block_duration, 3600.0);
        assert_eq!(s.flight_time, 30.0);
        assert_eq!(s.big_q, 1000.0);
        assert_eq!(s.users[0].rate_threshold, 2.0);
        assert_eq!(s.gbs[0].per_subchannel_power, 0.1);
        assert_eq!(s.gbs[0].height, 30.0);
        assert!((s.gbs[0].alpha_tilde - 5.64).abs() < 1e-12);
        assert_eq!(s.gbs[0].own_user_load, vec![0]);
        assert_eq!(s.dbs[0].altitude, 100.0);
        assert_eq!(s.dbs[0].alpha, 2.6);
        assert_eq!(s.dbs[0].beta, 1.0);
        assert_eq!(s.dbs[0].max_rate, 10.0);
        assert_eq!(s.dbs[0].box_max, Point::new(200.0, 200.0));
        assert_eq!(s.radio.carrier_freq_hz, 2.1e9);
    }

    #[test]
    fn q_above_slot_count_is_accepted() {
        let mut text = String::from("num_blocks = 1\nnum_subchannels = 1\nbig_q = 500.0\n");
        for i in 1..=10 {
            text.push_str(&format!("[[users]]\nid = {i}\nx = {}.0\ny = 0.0\n", i * 10));
        }
        text.push_str("[[gbs]]\nid = 1\nx = 300.0\ny = 0.0\n[[dbs]]\nid = 1\nx = 0.0\ny = 0.0\n");
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.num_users(), 10);
        assert_eq!(s.big_q, 500.0);
    }

    #[test]
    fn alpha_tilde_below_alpha_is_rejected() {
        let text = MINIMAL.replace("[[gbs]]\nid = 1\n", "[[gbs]]\nid = 1\nalpha = 4.7\nalpha_tilde = 4.0\n");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("alpha_l_tilde ≥ alpha_l"), "{err}");
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        let err = parse_scenario("num_blocks = [").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        let err = parse_scenario("bogus_key = 1").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_scenario("/nonexistent/scenario.toml").unwrap_err();
        assert!(matches!(err, ScenarioError::Io { .. }));
    }
}
