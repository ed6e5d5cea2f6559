//! Exact reference solver for tiny instances.
//!
//! Every binary assignment of users to (station, sub-channel) pairs is
//! enumerated and ranked by energy, which does not depend on where the drones
//! hover. Candidates are then checked in order of increasing energy: ground
//! rates directly, drone rates by searching drone positions on a grid over
//! each box. The first candidate with a feasible grid placement is the
//! optimum over the grid.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::association::{station_pairs, DecisionVars};
use crate::geometry::Point;
use crate::orchestrator::audit;
use crate::power::EnergyBreakdown;
use crate::radio::{candidate_sinr_gbs, drone_rx_power, rate_from_sinr, ActiveSet, Placement, Station};
use crate::scenario::{generate_random_scenario, GeneratorConfig, LoadProfile, Scenario};

pub const MAX_USERS: usize = 4;
pub const MAX_DRONES: usize = 2;
pub const MAX_GBS: usize = 2;
pub const MAX_SUBCHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("grid step {step} m does not divide the box of drone {drone}")]
    Grid { drone: u32, step: f64 },
    #[error("no feasible assignment on the grid")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Joules.
    pub energy: f64,
    pub vars: DecisionVars,
    pub placement: Placement,
    /// Assignments enumerated (all, before capacity filtering).
    pub enumerated: usize,
    /// Candidates whose rates were checked before the optimum was found.
    pub checked: usize,
}

fn grid(lo: f64, hi: f64, step: f64) -> Option<Vec<f64>> {
    let k = (hi - lo) / step;
    let kr = k.round();
    if !(step > 0.0) || (k - kr).abs() > 1e-9 * kr.max(1.0) {
        return None;
    }
    Some(
        (0..=kr as usize)
            .map(|i| if i == kr as usize { hi } else { lo + i as f64 * step })
            .collect(),
    )
}

/// Candidate drone positions and received powers, `rx[p][u]`.
struct DroneGrid {
    points: Vec<Point>,
    rx: Vec<Vec<f64>>,
}

impl DroneGrid {
    fn new(s: &Scenario, d: usize, step: f64) -> Result<Self, OracleError> {
        let drone = &s.dbs[d];
        let err = || OracleError::Grid { drone: drone.id, step };
        let xs = grid(drone.box_min.x, drone.box_max.x, step).ok_or_else(err)?;
        let ys = grid(drone.box_min.y, drone.box_max.y, step).ok_or_else(err)?;
        let mut points = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                points.push(Point::new(x, y));
            }
        }
        let mut probe = Placement::initial(s);
        let rx = points
            .iter()
            .map(|&p| {
                probe.set(0, d, p);
                (0..s.num_users()).map(|u| drone_rx_power(s, &probe, u, d, 0)).collect()
            })
            .collect();
        Ok(Self { points, rx })
    }
}

/// Users served by each drone, with their sub-channel.
type Served = Vec<Vec<(usize, usize)>>;

/// Smallest rate margin of drone `d`'s users with the drone at grid point
/// `p` and the interferers at the given points.
fn drone_margin(
    s: &Scenario,
    grids: &[DroneGrid],
    served: &Served,
    active: &ActiveSet,
    d: usize,
    p: usize,
    others: &[(usize, usize)],
) -> f64 {
    let noise = s.noise_power();
    let mut worst = f64::INFINITY;
    for &(u, m) in &served[d] {
        let mut interference = 0.0;
        for &(j, pj) in others {
            if active.drone(0, j, m) {
                interference += grids[j].rx[pj][u];
            }
        }
        let rate = rate_from_sinr(grids[d].rx[p][u] / (interference + noise));
        worst = worst.min(rate - s.users[u].rate_threshold);
    }
    worst
}

/// Grid positions for the active drones that meet every drone user's rate,
/// maximizing the smallest margin when `best` is set, else the first found.
fn place_drones(
    s: &Scenario,
    grids: &[DroneGrid],
    served: &Served,
    active: &ActiveSet,
    best: bool,
) -> Option<Vec<Option<usize>>> {
    let dims = s.dims();
    let busy: Vec<usize> = (0..dims.dbs).filter(|&d| !served[d].is_empty()).collect();
    let mut choice: Vec<Option<usize>> = vec![None; dims.dbs];

    let coupled =
        busy.len() == 2 && (0..dims.subchannels).any(|m| active.drone(0, busy[0], m) && active.drone(0, busy[1], m));

    // Alone, each drone must manage without any interference.
    let mut alone: Vec<Vec<usize>> = vec![Vec::new(); dims.dbs];
    for &d in &busy {
        let mut scored: Vec<(usize, f64)> = (0..grids[d].points.len())
            .map(|p| (p, drone_margin(s, grids, served, active, d, p, &[])))
            .filter(|&(_, v)| v >= 0.0)
            .collect();
        if scored.is_empty() {
            return None;
        }
        if !coupled {
            let pick = if best {
                scored.iter().fold(scored[0], |a, &b| if b.1 > a.1 { b } else { a }).0
            } else {
                scored[0].0
            };
            choice[d] = Some(pick);
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        alone[d] = scored.into_iter().map(|(p, _)| p).collect();
    }

    if coupled {
        let (a, b) = (busy[0], busy[1]);
        let mut found: Option<(f64, usize, usize)> = None;
        for &pa in &alone[a] {
            for &pb in &alone[b] {
                let va = drone_margin(s, grids, served, active, a, pa, &[(b, pb)]);
                if va < 0.0 {
                    continue;
                }
                let vb = drone_margin(s, grids, served, active, b, pb, &[(a, pa)]);
                if vb < 0.0 {
                    continue;
                }
                let v = va.min(vb);
                if found.is_none_or(|f| v > f.0) {
                    found = Some((v, pa, pb));
                }
                if !best {
                    break;
                }
            }
            if found.is_some() && !best {
                break;
            }
        }
        let (_, pa, pb) = found?;
        choice[a] = Some(pa);
        choice[b] = Some(pb);
    }
    Some(choice)
}

/// Exhaustive search over assignments and grid placements.
///
/// Requires at most 4 users, 2 drones, 2 ground stations, 2 sub-channels and
/// a single block; `grid_step` must divide every box evenly.
pub fn brute_force(s: &Scenario, grid_step: f64) -> Result<OracleResult, OracleError> {
    let dims = s.dims();
    let limits = [
        (dims.users, MAX_USERS, "users"),
        (dims.dbs, MAX_DRONES, "drones"),
        (dims.gbs, MAX_GBS, "ground stations"),
        (dims.subchannels, MAX_SUBCHANNELS, "sub-channels"),
    ];
    for (have, max, what) in limits {
        if have > max {
            return Err(OracleError::TooLarge(format!("{have} {what}, at most {max}")));
        }
    }
    if dims.blocks != 1 {
        return Err(OracleError::TooLarge(format!(
            "{} blocks, exactly 1 supported",
            dims.blocks
        )));
    }

    let grids: Vec<DroneGrid> = (0..dims.dbs)
        .map(|d| DroneGrid::new(s, d, grid_step))
        .collect::<Result<_, _>>()?;
    let pairs = station_pairs(dims);
    let enumerated = pairs.len().pow(dims.users as u32);

    // Capacity-feasible assignments with their energy.
    let mut candidates: Vec<(f64, usize, DecisionVars)> = Vec::new();
    for code in 0..enumerated {
        let mut x = DecisionVars::zeros(dims);
        let mut rest = code;
        for u in 0..dims.users {
            let (st, m) = pairs[rest % pairs.len()];
            rest /= pairs.len();
            x.assign(0, u, st, m);
        }
        x.derive_kappa();
        let gbs_ok = s.gbs.iter().enumerate().all(|(l, g)| {
            let load: f64 = s.own_user_rate_threshold * g.own_user_load[0] as f64
                + (0..dims.users)
                    .map(|u| s.users[u].rate_threshold * (0..dims.subchannels).map(|m| x.eps(0, u, l, m)).sum::<f64>())
                    .sum::<f64>();
            load <= g.max_rate + 1e-9
        });
        let dbs_ok = s.dbs.iter().enumerate().all(|(d, drone)| {
            let load: f64 = (0..dims.users)
                .map(|u| s.users[u].rate_threshold * (0..dims.subchannels).map(|m| x.zeta(0, u, d, m)).sum::<f64>())
                .sum();
            load <= drone.max_rate + 1e-9
        });
        if gbs_ok && dbs_ok {
            candidates.push((EnergyBreakdown::compute(s, &x).total(), code, x));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    for (checked, (energy, _, x)) in candidates.into_iter().enumerate() {
        let active = x.active_set();
        let ground_ok = (0..dims.users).all(|u| match x.assignment(0, u) {
            Some((Station::Ground(l), m)) => {
                rate_from_sinr(candidate_sinr_gbs(s, &active, u, l, m, 0)) >= s.users[u].rate_threshold
            }
            _ => true,
        });
        if !ground_ok {
            continue;
        }
        let mut served: Served = vec![Vec::new(); dims.dbs];
        for u in 0..dims.users {
            if let Some((Station::Drone(d), m)) = x.assignment(0, u) {
                served[d].push((u, m));
            }
        }
        if place_drones(s, &grids, &served, &active, false).is_none() {
            continue;
        }
        let choice = place_drones(s, &grids, &served, &active, true).expect("feasible placement exists");
        let mut placement = Placement::initial(s);
        for (d, c) in choice.iter().enumerate() {
            if let Some(p) = c {
                placement.set(0, d, grids[d].points[*p]);
            }
        }
        let mut vars = x;
        vars.binary = true;
        let verdict = audit(s, &vars, &placement);
        assert!(
            verdict.is_feasible(),
            "oracle optimum fails audit: {:?}",
            verdict.violations
        );
        debug!("oracle optimum {energy:.3} J after checking {} candidates", checked + 1);
        return Ok(OracleResult {
            energy,
            vars,
            placement,
            enumerated,
            checked: checked + 1,
        });
    }
    Err(OracleError::Infeasible)
}

/// The fixed corpus of tiny instances used to validate the solver against the
/// oracle: `count` seeded scenarios with 1-4 users, 1-2 ground stations,
/// 1-2 drones, 1-2 sub-channels and one block, ground stations close to
/// capacity.
pub fn tiny_corpus(count: usize) -> Vec<Scenario> {
    (0..count as u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
            let mut cfg = GeneratorConfig::new(
                seed,
                rng.gen_range(1..=MAX_USERS),
                rng.gen_range(1..=MAX_GBS),
                rng.gen_range(1..=MAX_DRONES),
                200.0,
            );
            cfg.num_subchannels = rng.gen_range(1..=MAX_SUBCHANNELS);
            cfg.num_blocks = 1;
            cfg.load = LoadProfile::NearCapacity {
                max_spare: rng.gen_range(0..=2),
            };
            generate_random_scenario(&cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{build_lp, solve_lp, LpOptions};
    use crate::radio::RateTable;

    fn single(own_load: u32) -> Scenario {
        let mut cfg = GeneratorConfig::new(40, 1, 1, 1, 200.0);
        cfg.num_subchannels = 1;
        cfg.num_blocks = 1;
        cfg.load = LoadProfile::Fixed(own_load);
        let mut s = generate_random_scenario(&cfg);
        s.users[0].position = Point::new(33.0, -47.0);
        // Bring the ground station within reach of the user.
        s.gbs[0].position = Point::new(100.0, -100.0);
        s
    }

    #[test]
    fn spare_ground_capacity_wins() {
        let s = single(0);
        let r = brute_force(&s, 10.0).unwrap();
        assert_eq!(r.vars.assignment(0, 0), Some((Station::Ground(0), 0)));
        assert_eq!(r.vars.kappa(0, 0), 0.0);
        assert!((r.energy - 2030.4).abs() < 1e-6);
        assert_eq!(r.enumerated, 2);
    }

    #[test]
    fn full_ground_station_needs_drone_near_user() {
        let s = single(50);
        let r = brute_force(&s, 10.0).unwrap();
        assert_eq!(r.vars.assignment(0, 0), Some((Station::Drone(0), 0)));
        assert_eq!(r.vars.kappa(0, 0), 1.0);
        assert_eq!(r.placement.get(0, 0), Point::new(30.0, -50.0));
    }

    #[test]
    fn empty_user_set_is_free() {
        let mut s = single(0);
        s.users.clear();
        let r = brute_force(&s, 10.0).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.vars.active_drone_count(0), 0);
    }

    #[test]
    fn size_limits_enforced() {
        let mut s = single(0);
        s.num_blocks = 2;
        s.gbs[0].own_user_load = vec![0, 0];
        assert!(matches!(brute_force(&s, 10.0), Err(OracleError::TooLarge(_))));
        let s = single(0);
        assert!(matches!(brute_force(&s, 7.0), Err(OracleError::Grid { .. })));
    }

    #[test]
    fn optimum_is_cheapest_over_every_grid_point() {
        // Reference: for each capacity-feasible assignment, scan the grid for
        // any placement meeting all rates; the minimum energy must match.
        for s in tiny_corpus(6).into_iter().filter(|s| s.num_users() <= 2) {
            let dims = s.dims();
            let pairs = station_pairs(dims);
            let grids: Vec<Vec<Point>> = (0..dims.dbs)
                .map(|d| DroneGrid::new(&s, d, 40.0).unwrap().points)
                .collect();
            let mut best = f64::INFINITY;
            for code in 0..pairs.len().pow(dims.users as u32) {
                let mut x = DecisionVars::zeros(dims);
                let mut rest = code;
                for u in 0..dims.users {
                    let (st, m) = pairs[rest % pairs.len()];
                    rest /= pairs.len();
                    x.assign(0, u, st, m);
                }
                x.derive_kappa();
                x.binary = true;
                let energy = EnergyBreakdown::compute(&s, &x).total();
                if energy >= best {
                    continue;
                }
                let mut placement = Placement::initial(&s);
                let mut idx = vec![0usize; dims.dbs];
                'scan: loop {
                    for d in 0..dims.dbs {
                        placement.set(0, d, grids[d][idx[d]]);
                    }
                    if audit(&s, &x, &placement).is_feasible() {
                        best = energy;
                        break 'scan;
                    }
                    let mut d = 0;
                    loop {
                        if d == dims.dbs {
                            break 'scan;
                        }
                        idx[d] += 1;
                        if idx[d] < grids[d].len() {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                    }
                }
            }
            match brute_force(&s, 40.0) {
                Ok(r) => assert!((r.energy - best).abs() < 1e-6, "oracle {} vs scan {}", r.energy, best),
                Err(OracleError::Infeasible) => assert!(best.is_infinite()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn lp_bound_holds_on_corpus() {
        for s in tiny_corpus(8) {
            let Ok(r) = brute_force(&s, 10.0) else { continue };
            let rates = RateTable::upper_bound(&s);
            let model = build_lp(&s, &rates, &DecisionVars::zeros(s.dims()), &LpOptions::default()).unwrap();
            let lp = solve_lp(&model).unwrap();
            assert!(lp.objective <= r.energy + 1e-6, "{} > {}", lp.objective, r.energy);
        }
    }
}
