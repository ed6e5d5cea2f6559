//! Seeded random instances around a failed cell at the origin.
//!
//! Users are drawn uniformly in `[-w, w]^2`. Neighbouring ground stations sit
//! evenly spaced on a ring of radius `1.5 w`; standby drones start evenly
//! spaced on a ring of radius `w / 2` and may roam the whole `[-w, w]^2`
//! square. Own-user loads are redrawn per block.
//!
//! User positions and station loads come from independent random streams, so
//! for a fixed seed the first `k` users are the same whatever `num_users` is,
//! and the loads do not depend on the user count at all.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    DroneEnergyAccounting, DronePowerParams, DroneStation, GroundStation, RadioParams, Scenario, UserEquipment,
};
use crate::geometry::Point;

const USER_STREAM: u64 = 1;
const LOAD_STREAM: u64 = 2;

/// Distribution of each ground station's own-user count per block. `cap` is
/// `floor(max_rate / own_user_rate_threshold)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadProfile {
    /// Uniform integer in `[0, cap]`.
    Uniform,
    /// Uniform integer in `[cap - max_spare, cap]`: stations that can absorb
    /// at most `max_spare` stranded users each.
    NearCapacity { max_spare: u32 },
    /// Same count for every station and block (clamped to `cap`).
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_users: usize,
    pub num_gbs: usize,
    pub num_dbs: usize,
    pub area_half_width: f64,
    pub num_subchannels: usize,
    pub num_blocks: usize,
    pub load: LoadProfile,
    pub rate_threshold: f64,
    pub gbs_max_rate: f64,
    pub dbs_max_rate: f64,
    pub radio: RadioParams,
    pub drone_energy: DroneEnergyAccounting,
}

impl GeneratorConfig {
    pub fn new(seed: u64, num_users: usize, num_gbs: usize, num_dbs: usize, area_half_width: f64) -> Self {
        Self {
            seed,
            num_users,
            num_gbs,
            num_dbs,
            area_half_width,
            num_subchannels: 4,
            num_blocks: 2,
            load: LoadProfile::Uniform,
            rate_threshold: 2.0,
            gbs_max_rate: 100.0,
            dbs_max_rate: 10.0,
            radio: RadioParams::default(),
            drone_energy: DroneEnergyAccounting::Gated,
        }
    }
}

/// Builds a scenario from `config`. A pure function of the config.
///
/// Panics if a count is zero or the half width is not positive.
pub fn generate_random_scenario(config: &GeneratorConfig) -> Scenario {
    assert!(config.num_users >= 1, "num_users must be >= 1");
    assert!(config.num_gbs >= 1, "num_gbs must be >= 1");
    assert!(config.num_dbs >= 1, "num_dbs must be >= 1");
    assert!(config.area_half_width > 0.0, "area_half_width must be > 0");
    assert!(config.num_subchannels >= 1 && config.num_blocks >= 1);

    let w = config.area_half_width;

    let mut user_rng = ChaCha8Rng::seed_from_u64(config.seed);
    user_rng.set_stream(USER_STREAM);
    let users = (0..config.num_users)
        .map(|i| UserEquipment {
            id: i as u32 + 1,
            position: Point::new(user_rng.gen_range(-w..=w), user_rng.gen_range(-w..=w)),
            rate_threshold: config.rate_threshold,
        })
        .collect();

    let own_rate = config.rate_threshold;
    let cap = (config.gbs_max_rate / own_rate).floor().max(0.0) as u32;
    let mut load_rng = ChaCha8Rng::seed_from_u64(config.seed);
    load_rng.set_stream(LOAD_STREAM);

    let ring = 1.5 * w;
    let gbs = (0..config.num_gbs)
        .map(|l| {
            let angle = 2.0 * PI * l as f64 / config.num_gbs as f64;
            let own_user_load = (0..config.num_blocks)
                .map(|_| match config.load {
                    LoadProfile::Uniform => load_rng.gen_range(0..=cap),
                    LoadProfile::NearCapacity { max_spare } => load_rng.gen_range(cap.saturating_sub(max_spare)..=cap),
                    LoadProfile::Fixed(k) => k.min(cap),
                })
                .collect();
            let alpha = 4.7;
            GroundStation {
                id: l as u32 + 1,
                position: Point::new(ring * angle.cos(), ring * angle.sin()),
                height: 30.0,
                per_subchannel_power: 0.1,
                alpha,
                alpha_tilde: 1.2 * alpha,
                beta: 130.0,
                own_user_load,
                max_rate: config.gbs_max_rate,
            }
        })
        .collect();

    let box_min = Point::new(-w, -w);
    let box_max = Point::new(w, w);
    let dbs = (0..config.num_dbs)
        .map(|d| {
            let angle = PI / 4.0 + 2.0 * PI * d as f64 / config.num_dbs as f64;
            let start = Point::new(0.5 * w * angle.cos(), 0.5 * w * angle.sin());
            DroneStation {
                id: d as u32 + 1,
                initial_position: start.clamp(box_min, box_max),
                altitude: 100.0,
                per_subchannel_power: 0.1,
                alpha: 2.6,
                beta: 1.0,
                power: DronePowerParams::default(),
                max_rate: config.dbs_max_rate,
                box_min,
                box_max,
            }
        })
        .collect();

    Scenario {
        users,
        gbs,
        dbs,
        num_subchannels: config.num_subchannels,
        num_blocks: config.num_blocks,
        block_duration: 3600.0,
        flight_time: 30.0,
        radio: config.radio.clone(),
        big_q: 1000.0,
        own_user_rate_threshold: own_rate,
        drone_energy: config.drone_energy,
    }
}
