//! Ground-station and drone power draw, and the healing energy built from it.
//!
//! All energies are affine in the association and usage variables for a fixed
//! drone placement, which is what lets the association step be a linear
//! program.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::association::DecisionVars;
use crate::scenario::{DroneEnergyAccounting, DronePowerParams, Scenario};

/// Normal-operation draw of a ground station: `alpha * P_users + beta`, with
/// `P_users = user_count * p_per_user`. Reporting only.
pub fn gbs_baseline_power(alpha: f64, beta: f64, p_per_user: f64, user_count: u32) -> f64 {
    alpha * user_count as f64 * p_per_user + beta
}

/// Extra power a ground station radiates on one sub-channel to heal the
/// stranded users assigned to it. `beta` is already paid and not included.
pub fn gbs_healing_power(alpha_tilde: f64, eps: &[f64], p_subchannel: f64) -> f64 {
    alpha_tilde * eps.iter().sum::<f64>() * p_subchannel
}

/// Rotor power needed to hover.
pub fn hover_power(p: &DronePowerParams) -> f64 {
    let weight = p.total_mass * p.gravity;
    let disk = 2.0 * PI * p.propeller_radius * p.propeller_radius * p.propeller_count as f64 * p.air_density;
    (weight.powi(3) / disk).sqrt()
}

/// Electronics and locomotion power: linear from `p_idle` at rest to `p_full`
/// at `v_max`.
pub fn hardware_power(p: &DronePowerParams) -> f64 {
    (p.p_full - p.p_idle) / p.v_max * p.v_d + p.p_idle
}

/// Healing energy of ground station `l` in block `n`, summed over sub-channels.
pub fn gbs_energy(s: &Scenario, x: &DecisionVars, l: usize, n: usize) -> f64 {
    let g = &s.gbs[l];
    let mut power = 0.0;
    for m in 0..s.num_subchannels {
        let eps: Vec<f64> = (0..s.num_users()).map(|u| x.eps(n, u, l, m)).collect();
        power += gbs_healing_power(g.alpha_tilde, &eps, g.per_subchannel_power);
    }
    s.block_duration * power
}

/// Cost of switching a drone on for a block, excluding travel: hover plus
/// hardware for the whole block and, under gated accounting, `T * beta`.
pub fn drone_block_cost(s: &Scenario, d: usize) -> f64 {
    let drone = &s.dbs[d];
    let har = hardware_power(&drone.power);
    let hov = hover_power(&drone.power);
    let base = s.block_duration * (har + hov);
    match s.drone_energy {
        DroneEnergyAccounting::Gated => base + s.block_duration * drone.beta,
        DroneEnergyAccounting::Literal => base,
    }
}

/// Travel energy `T_f * P_har`.
pub fn drone_travel_cost(s: &Scenario, d: usize) -> f64 {
    s.flight_time * hardware_power(&s.dbs[d].power)
}

/// Transmit energy per unit of association mass on drone `d`.
pub fn drone_link_cost(s: &Scenario, d: usize) -> f64 {
    let drone = &s.dbs[d];
    s.block_duration * drone.alpha * drone.per_subchannel_power
}

pub fn gbs_link_cost(s: &Scenario, l: usize) -> f64 {
    let g = &s.gbs[l];
    s.block_duration * g.alpha_tilde * g.per_subchannel_power
}

/// Energy of drone `d` over one block.
///
/// `kappa_prev` is the usage in the previous block (0 before the first); under
/// gated accounting the travel energy is charged on the increase only.
/// `zeta` holds the drone's association variables for the block.
pub fn dbs_energy(s: &Scenario, d: usize, kappa: f64, kappa_prev: f64, zeta: &[f64]) -> f64 {
    let drone = &s.dbs[d];
    let transmit = s.block_duration * (drone.alpha * zeta.iter().sum::<f64>() * drone.per_subchannel_power);
    match s.drone_energy {
        DroneEnergyAccounting::Gated => {
            kappa * drone_block_cost(s, d) + (kappa - kappa_prev).max(0.0) * drone_travel_cost(s, d) + transmit
        }
        DroneEnergyAccounting::Literal => {
            kappa * (drone_block_cost(s, d) + drone_travel_cost(s, d)) + s.block_duration * drone.beta + transmit
        }
    }
}

/// Per-station, per-block healing energy in joules.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    /// `gbs[l][n]`
    pub gbs: Vec<Vec<f64>>,
    /// `dbs[d][n]`
    pub dbs: Vec<Vec<f64>>,
}

impl EnergyBreakdown {
    pub fn compute(s: &Scenario, x: &DecisionVars) -> Self {
        let dims = s.dims();
        let gbs = (0..dims.gbs)
            .map(|l| (0..dims.blocks).map(|n| gbs_energy(s, x, l, n)).collect())
            .collect();
        let dbs = (0..dims.dbs)
            .map(|d| {
                (0..dims.blocks)
                    .map(|n| {
                        let prev = if n == 0 { 0.0 } else { x.kappa(n - 1, d) };
                        let mut zeta = Vec::with_capacity(dims.users * dims.subchannels);
                        for u in 0..dims.users {
                            for m in 0..dims.subchannels {
                                zeta.push(x.zeta(n, u, d, m));
                            }
                        }
                        dbs_energy(s, d, x.kappa(n, d), prev, &zeta)
                    })
                    .collect()
            })
            .collect();
        Self { gbs, dbs }
    }

    pub fn gbs_total(&self) -> f64 {
        self.gbs.iter().flatten().sum()
    }

    pub fn dbs_total(&self) -> f64 {
        self.dbs.iter().flatten().sum()
    }

    pub fn total(&self) -> f64 {
        self.gbs_total() + self.dbs_total()
    }

    pub fn block_total(&self, n: usize) -> f64 {
        self.gbs.iter().map(|v| v[n]).sum::<f64>() + self.dbs.iter().map(|v| v[n]).sum::<f64>()
    }

    /// Running total over blocks.
    pub fn accumulated(&self) -> Vec<f64> {
        let blocks = self.gbs.first().or(self.dbs.first()).map_or(0, Vec::len);
        let mut acc = 0.0;
        (0..blocks)
            .map(|n| {
                acc += self.block_total(n);
                acc
            })
            .collect()
    }

    /// One row per (block, station): `block,station_kind,station_id,energy_j`.
    pub fn write_csv<W: Write>(&self, s: &Scenario, out: W) -> csv::Result<()> {
        #[derive(Serialize)]
        struct Row {
            block: usize,
            station_kind: &'static str,
            station_id: u32,
            energy_j: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        let blocks = s.num_blocks;
        for n in 0..blocks {
            for (l, e) in self.gbs.iter().enumerate() {
                w.serialize(Row {
                    block: n + 1,
                    station_kind: "gbs",
                    station_id: s.gbs[l].id,
                    energy_j: e[n],
                })?;
            }
            for (d, e) in self.dbs.iter().enumerate() {
                w.serialize(Row {
                    block: n + 1,
                    station_kind: "dbs",
                    station_id: s.dbs[d].id,
                    energy_j: e[n],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
