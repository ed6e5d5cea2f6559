//! Line-of-sight link model: distances, channel gains, SINR and per
//! sub-channel rates for drone-to-user and ground-to-user links.
//!
//! The two tiers never interfere with each other. Within a tier, a station
//! interferes on sub-channel `m` only if it is marked active on `m` in the
//! [`ActiveSet`].

use std::io::Write;

use serde::Serialize;

use crate::geometry::Point;
use crate::scenario::{Dims, Scenario};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RadioError {
    #[error("drone {drone} is not transmitting on sub-channel {subchannel} in block {block}")]
    InactiveDrone {
        drone: usize,
        subchannel: usize,
        block: usize,
    },
    #[error("ground station {gbs} is not transmitting on sub-channel {subchannel}")]
    InactiveGbs { gbs: usize, subchannel: usize },
}

/// A serving station: ground station `l` or drone `d` (indices, not ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Station {
    Ground(usize),
    Drone(usize),
}

impl Station {
    pub fn kind(self) -> &'static str {
        match self {
            Station::Ground(_) => "gbs",
            Station::Drone(_) => "dbs",
        }
    }

    pub fn id(self, scenario: &Scenario) -> u32 {
        match self {
            Station::Ground(l) => scenario.gbs[l].id,
            Station::Drone(d) => scenario.dbs[d].id,
        }
    }
}

/// Horizontal drone coordinates per block: `coords[n][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub coords: Vec<Vec<Point>>,
}

impl Placement {
    /// Every drone at its initial position in every block.
    pub fn initial(scenario: &Scenario) -> Self {
        let start: Vec<Point> = scenario.dbs.iter().map(|d| d.initial_position).collect();
        Self {
            coords: vec![start; scenario.num_blocks],
        }
    }

    pub fn get(&self, n: usize, d: usize) -> Point {
        self.coords[n][d]
    }

    pub fn set(&mut self, n: usize, d: usize, p: Point) {
        self.coords[n][d] = p;
    }
}

/// Which stations transmit on which sub-channel in each block.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    dims: Dims,
    drones: Vec<bool>,
    gbs: Vec<bool>,
}

impl ActiveSet {
    /// Nothing transmits.
    pub fn silent(dims: Dims) -> Self {
        Self {
            dims,
            drones: vec![false; dims.blocks * dims.subchannels * dims.dbs],
            gbs: vec![false; dims.blocks * dims.subchannels * dims.gbs],
        }
    }

    /// Every ground station on every sub-channel and no drone: the state right
    /// after the failure, when the neighbours have taken over all users.
    pub fn conventional(dims: Dims) -> Self {
        let mut a = Self::silent(dims);
        a.gbs.iter_mut().for_each(|x| *x = true);
        a
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn di(&self, n: usize, d: usize, m: usize) -> usize {
        (n * self.dims.subchannels + m) * self.dims.dbs + d
    }

    fn li(&self, n: usize, l: usize, m: usize) -> usize {
        (n * self.dims.subchannels + m) * self.dims.gbs + l
    }

    pub fn drone(&self, n: usize, d: usize, m: usize) -> bool {
        self.drones[self.di(n, d, m)]
    }

    pub fn ground(&self, n: usize, l: usize, m: usize) -> bool {
        self.gbs[self.li(n, l, m)]
    }

    pub fn station(&self, n: usize, s: Station, m: usize) -> bool {
        match s {
            Station::Ground(l) => self.ground(n, l, m),
            Station::Drone(d) => self.drone(n, d, m),
        }
    }

    pub fn set_drone(&mut self, n: usize, d: usize, m: usize, on: bool) {
        let i = self.di(n, d, m);
        self.drones[i] = on;
    }

    pub fn set_ground(&mut self, n: usize, l: usize, m: usize, on: bool) {
        let i = self.li(n, l, m);
        self.gbs[i] = on;
    }

    pub fn set_station(&mut self, n: usize, s: Station, m: usize, on: bool) {
        match s {
            Station::Ground(l) => self.set_ground(n, l, m, on),
            Station::Drone(d) => self.set_drone(n, d, m, on),
        }
    }

    /// Drones transmitting on `m` in block `n`.
    pub fn drones_on(&self, n: usize, m: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims.dbs).filter(move |&d| self.drone(n, d, m))
    }

    pub fn grounds_on(&self, n: usize, m: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims.gbs).filter(move |&l| self.ground(n, l, m))
    }

    /// Distinct drones transmitting on any sub-channel in block `n`.
    pub fn active_drones(&self, n: usize) -> Vec<usize> {
        (0..self.dims.dbs)
            .filter(|&d| (0..self.dims.subchannels).any(|m| self.drone(n, d, m)))
            .collect()
    }
}

pub fn dist_dbs_user(drone: Point, user: Point, altitude: f64) -> f64 {
    (altitude * altitude + drone.dist_sq(user)).sqrt()
}

pub fn dist_gbs_user(gbs: Point, user: Point, height: f64) -> f64 {
    (height * height + gbs.dist_sq(user)).sqrt()
}

/// Free-space gain of a drone link: `rho0 / (h^2 + |J - g|^2)`.
pub fn gain_dbs(drone: Point, user: Point, altitude: f64, rho0: f64) -> f64 {
    rho0 / (altitude * altitude + drone.dist_sq(user))
}

/// Urban gain of a ground link: `rho0 / delta^alpha`.
pub fn gain_gbs(gbs: Point, user: Point, height: f64, rho0: f64, alpha: f64) -> f64 {
    let sq = height * height + gbs.dist_sq(user);
    rho0 / sq.powf(0.5 * alpha)
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Received power at user `u` from drone `d` in block `n`.
pub fn drone_rx_power(s: &Scenario, placement: &Placement, u: usize, d: usize, n: usize) -> f64 {
    let drone = &s.dbs[d];
    drone.per_subchannel_power * gain_dbs(placement.get(n, d), s.users[u].position, drone.altitude, s.radio.rho0)
}

pub fn ground_rx_power(s: &Scenario, u: usize, l: usize) -> f64 {
    let g = &s.gbs[l];
    g.per_subchannel_power
        * gain_gbs(
            g.position,
            s.users[u].position,
            g.height,
            s.radio.rho0,
            s.radio.pathloss_exponent_gbs,
        )
}

/// SINR user `u` would see from drone `d` on `m`, whether or not `d` is
/// currently marked active. Interference comes from every other drone active
/// on `m`.
pub fn candidate_sinr_dbs(
    s: &Scenario,
    placement: &Placement,
    active: &ActiveSet,
    u: usize,
    d: usize,
    m: usize,
    n: usize,
) -> f64 {
    let interference: f64 = active
        .drones_on(n, m)
        .filter(|&j| j != d)
        .map(|j| drone_rx_power(s, placement, u, j, n))
        .sum();
    drone_rx_power(s, placement, u, d, n) / (interference + s.noise_power())
}

pub fn candidate_sinr_gbs(s: &Scenario, active: &ActiveSet, u: usize, l: usize, m: usize, n: usize) -> f64 {
    let interference: f64 = active
        .grounds_on(n, m)
        .filter(|&i| i != l)
        .map(|i| ground_rx_power(s, u, i))
        .sum();
    ground_rx_power(s, u, l) / (interference + s.noise_power())
}

pub fn sinr_dbs(
    s: &Scenario,
    placement: &Placement,
    active: &ActiveSet,
    u: usize,
    d: usize,
    m: usize,
    n: usize,
) -> Result<f64, RadioError> {
    if !active.drone(n, d, m) {
        return Err(RadioError::InactiveDrone {
            drone: d,
            subchannel: m,
            block: n,
        });
    }
    Ok(candidate_sinr_dbs(s, placement, active, u, d, m, n))
}

pub fn sinr_gbs(s: &Scenario, active: &ActiveSet, u: usize, l: usize, m: usize, n: usize) -> Result<f64, RadioError> {
    if !active.ground(n, l, m) {
        return Err(RadioError::InactiveGbs { gbs: l, subchannel: m });
    }
    Ok(candidate_sinr_gbs(s, active, u, l, m, n))
}

/// Rate of user `u` if served by `station` on `m` under `active`.
pub fn link_rate(
    s: &Scenario,
    placement: &Placement,
    active: &ActiveSet,
    u: usize,
    station: Station,
    m: usize,
    n: usize,
) -> f64 {
    let sinr = match station {
        Station::Ground(l) => candidate_sinr_gbs(s, active, u, l, m, n),
        Station::Drone(d) => candidate_sinr_dbs(s, placement, active, u, d, m, n),
    };
    rate_from_sinr(sinr)
}

/// Achievable rates, bps/Hz, for every (user, station, sub-channel, block).
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    dims: Dims,
    r_dbs: Vec<f64>,
    r_gbs: Vec<f64>,
}

impl RateTable {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            r_dbs: vec![0.0; dims.blocks * dims.users * dims.dbs * dims.subchannels],
            r_gbs: vec![0.0; dims.blocks * dims.users * dims.gbs * dims.subchannels],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn di(&self, n: usize, u: usize, d: usize, m: usize) -> usize {
        ((n * self.dims.users + u) * self.dims.dbs + d) * self.dims.subchannels + m
    }

    fn li(&self, n: usize, u: usize, l: usize, m: usize) -> usize {
        ((n * self.dims.users + u) * self.dims.gbs + l) * self.dims.subchannels + m
    }

    pub fn dbs(&self, n: usize, u: usize, d: usize, m: usize) -> f64 {
        self.r_dbs[self.di(n, u, d, m)]
    }

    pub fn gbs(&self, n: usize, u: usize, l: usize, m: usize) -> f64 {
        self.r_gbs[self.li(n, u, l, m)]
    }

    pub fn station(&self, n: usize, u: usize, s: Station, m: usize) -> f64 {
        match s {
            Station::Ground(l) => self.gbs(n, u, l, m),
            Station::Drone(d) => self.dbs(n, u, d, m),
        }
    }

    pub fn set_dbs(&mut self, n: usize, u: usize, d: usize, m: usize, r: f64) {
        let i = self.di(n, u, d, m);
        self.r_dbs[i] = r;
    }

    pub fn set_gbs(&mut self, n: usize, u: usize, l: usize, m: usize, r: f64) {
        let i = self.li(n, u, l, m);
        self.r_gbs[i] = r;
    }

    /// Best rate each link could ever reach: no co-channel interference and
    /// the drone hovering at the point of its box nearest the user.
    pub fn upper_bound(s: &Scenario) -> Self {
        let dims = s.dims();
        let mut t = Self::zeros(dims);
        let noise = s.noise_power();
        for n in 0..dims.blocks {
            for u in 0..dims.users {
                let g = s.users[u].position;
                for (d, drone) in s.dbs.iter().enumerate() {
                    let best = g.clamp(drone.box_min, drone.box_max);
                    let rx = drone.per_subchannel_power * gain_dbs(best, g, drone.altitude, s.radio.rho0);
                    for m in 0..dims.subchannels {
                        t.set_dbs(n, u, d, m, rate_from_sinr(rx / noise));
                    }
                }
                for l in 0..dims.gbs {
                    let r = rate_from_sinr(ground_rx_power(s, u, l) / noise);
                    for m in 0..dims.subchannels {
                        t.set_gbs(n, u, l, m, r);
                    }
                }
            }
        }
        t
    }

    pub fn write_csv<W: Write>(&self, s: &Scenario, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dims;
        for n in 0..d.blocks {
            for u in 0..d.users {
                for l in 0..d.gbs {
                    for m in 0..d.subchannels {
                        w.serialize(RateRow {
                            block: n + 1,
                            user: s.users[u].id,
                            station_kind: "gbs",
                            station_id: s.gbs[l].id,
                            subchannel: m + 1,
                            rate: self.gbs(n, u, l, m),
                        })?;
                    }
                }
                for dd in 0..d.dbs {
                    for m in 0..d.subchannels {
                        w.serialize(RateRow {
                            block: n + 1,
                            user: s.users[u].id,
                            station_kind: "dbs",
                            station_id: s.dbs[dd].id,
                            subchannel: m + 1,
                            rate: self.dbs(n, u, dd, m),
                        })?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct RateRow {
    block: usize,
    user: u32,
    station_kind: &'static str,
    station_id: u32,
    subchannel: usize,
    rate: f64,
}

/// Rates of every link under the given placement and activity pattern.
pub fn build_rate_table(s: &Scenario, placement: &Placement, active: &ActiveSet) -> RateTable {
    let dims = s.dims();
    let mut t = RateTable::zeros(dims);
    for n in 0..dims.blocks {
        for u in 0..dims.users {
            for m in 0..dims.subchannels {
                for d in 0..dims.dbs {
                    let r = rate_from_sinr(candidate_sinr_dbs(s, placement, active, u, d, m, n));
                    t.set_dbs(n, u, d, m, r);
                }
                for l in 0..dims.gbs {
                    let r = rate_from_sinr(candidate_sinr_gbs(s, active, u, l, m, n));
                    t.set_gbs(n, u, l, m, r);
                }
            }
        }
    }
    t
}
