use std::cmp::Ordering;

use log::trace;

use super::vars::{station_pairs, DecisionVars};
use crate::power::{drone_block_cost, drone_link_cost, drone_travel_cost, gbs_link_cost};
use crate::radio::{link_rate, ActiveSet, Placement, Station};
use crate::scenario::{DroneEnergyAccounting, Scenario};

/// Blocks are 1-based.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructError {
    #[error("no binary completion found: user {user} cannot be placed in block {block}")]
    Infeasible { user: u32, block: usize },
}

/// Mass below this is treated as zero.
const MASS_TOL: f64 = 1e-9;

/// Rounds the relaxed solution of `blocks` to a binary assignment.
///
/// Within a block, users are taken by descending largest mass. Each goes to
/// the pair carrying the most of its mass on which it still fits: the station
/// has capacity left, the user's rate clears its threshold and no user
/// already placed on the same tier and sub-channel drops below its own. If no
/// pair with mass fits, every pair is tried in order of the energy it adds,
/// switching on a new drone only as a last resort. Rates are evaluated with
/// the radio model under the stations switched on so far, so the result is
/// feasible as it stands.
///
/// A drone that is still idle may also be tried hovering right above the
/// user (clamped to its box); if that is the move taken, the returned
/// placement records it.
///
/// Blocks are processed in order so that a drone already on in the previous
/// block is cheaper to keep. Blocks not listed are copied from `relaxed`.
pub fn reconstruct_binary(
    relaxed: &DecisionVars,
    s: &Scenario,
    placement: &Placement,
    blocks: &[usize],
) -> Result<(DecisionVars, Placement), ReconstructError> {
    let dims = s.dims();
    let mut out = relaxed.clone();
    let mut place = placement.clone();
    let pairs = station_pairs(dims);

    for &n in blocks {
        let mut active = ActiveSet::silent(dims);
        let mut gbs_load: Vec<f64> = s
            .gbs
            .iter()
            .map(|g| s.own_user_rate_threshold * g.own_user_load[n] as f64)
            .collect();
        let mut dbs_load = vec![0.0; dims.dbs];
        let mut placed: Vec<Option<(Station, usize)>> = vec![None; dims.users];

        let max_mass = |u: usize| {
            pairs
                .iter()
                .map(|&(st, m)| relaxed.mass(n, u, st, m))
                .fold(0.0f64, f64::max)
        };
        let mut order: Vec<usize> = (0..dims.users).collect();
        order.sort_by(|&a, &b| {
            max_mass(b)
                .partial_cmp(&max_mass(a))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });

        let drone_was_on = |d: usize, out: &DecisionVars| n > 0 && out.kappa(n - 1, d) > 0.5;

        for &u in &order {
            let fits = |st: Station,
                        m: usize,
                        place: &Placement,
                        active: &ActiveSet,
                        gbs_load: &[f64],
                        dbs_load: &[f64],
                        placed: &[Option<(Station, usize)>]| {
                let th = s.users[u].rate_threshold;
                let room = match st {
                    Station::Ground(l) => gbs_load[l] + th <= s.gbs[l].max_rate + 1e-9,
                    Station::Drone(d) => dbs_load[d] + th <= s.dbs[d].max_rate + 1e-9,
                };
                if !room {
                    return false;
                }
                let mut trial = active.clone();
                trial.set_station(n, st, m, true);
                if link_rate(s, place, &trial, u, st, m, n) < th {
                    return false;
                }
                if active.station(n, st, m) {
                    return true;
                }
                placed.iter().enumerate().all(|(v, p)| match *p {
                    Some((other, mm)) if mm == m && same_tier(other, st) => {
                        link_rate(s, place, &trial, v, other, m, n) >= s.users[v].rate_threshold
                    }
                    _ => true,
                })
            };

            let mut by_mass: Vec<(Station, usize, f64)> = pairs
                .iter()
                .map(|&(st, m)| (st, m, relaxed.mass(n, u, st, m)))
                .filter(|&(_, _, w)| w > MASS_TOL)
                .collect();
            by_mass.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal));

            let mut choice = by_mass
                .iter()
                .find(|&&(st, m, _)| fits(st, m, &place, &active, &gbs_load, &dbs_load, &placed))
                .map(|&(st, m, _)| (st, m));

            if choice.is_none() {
                let drone_in_use = |d: usize| dbs_load[d] > 0.0;
                // (new drone, energy, relocate, station, sub-channel)
                let mut fallback: Vec<(bool, f64, bool, Station, usize)> = Vec::new();
                for &(st, m) in &pairs {
                    match st {
                        Station::Ground(l) => fallback.push((false, gbs_link_cost(s, l), false, st, m)),
                        Station::Drone(d) if drone_in_use(d) => {
                            fallback.push((false, drone_link_cost(s, d), false, st, m))
                        }
                        Station::Drone(d) => {
                            let mut cost = drone_link_cost(s, d) + drone_block_cost(s, d);
                            let travel = match s.drone_energy {
                                DroneEnergyAccounting::Gated => !drone_was_on(d, &out),
                                DroneEnergyAccounting::Literal => true,
                            };
                            if travel {
                                cost += drone_travel_cost(s, d);
                            }
                            fallback.push((true, cost, false, st, m));
                            fallback.push((true, cost, true, st, m));
                        }
                    }
                }
                fallback.sort_by(|a, b| {
                    a.0.cmp(&b.0)
                        .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
                        .then(a.2.cmp(&b.2))
                        .then(a.3.cmp(&b.3))
                        .then(a.4.cmp(&b.4))
                });
                for &(_, _, relocate, st, m) in &fallback {
                    let mut trial = place.clone();
                    if let (true, Station::Drone(d)) = (relocate, st) {
                        let drone = &s.dbs[d];
                        trial.set(n, d, s.users[u].position.clamp(drone.box_min, drone.box_max));
                    }
                    if fits(st, m, &trial, &active, &gbs_load, &dbs_load, &placed) {
                        place = trial;
                        choice = Some((st, m));
                        break;
                    }
                }
            }

            let Some((st, m)) = choice else {
                return Err(ReconstructError::Infeasible {
                    user: s.users[u].id,
                    block: n + 1,
                });
            };
            trace!("block {n}: user {} -> {:?} on sub-channel {m}", s.users[u].id, st);
            active.set_station(n, st, m, true);
            match st {
                Station::Ground(l) => gbs_load[l] += s.users[u].rate_threshold,
                Station::Drone(d) => dbs_load[d] += s.users[u].rate_threshold,
            }
            placed[u] = Some((st, m));
        }

        for (u, p) in placed.iter().enumerate() {
            let (st, m) = p.expect("every user placed");
            out.assign(n, u, st, m);
        }
        for d in 0..dims.dbs {
            let on = out.drone_load(n, d) > 0.5;
            out.set_kappa(n, d, if on { 1.0 } else { 0.0 });
        }
    }
    out.binary = out.is_integral(0.0);
    Ok((out, place))
}

fn same_tier(a: Station, b: Station) -> bool {
    matches!(
        (a, b),
        (Station::Ground(_), Station::Ground(_)) | (Station::Drone(_), Station::Drone(_))
    )
}
