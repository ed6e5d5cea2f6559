//! Independent feasibility check of a binary solution.
//!
//! Reads only the raw decision values, the placement and the scenario; rates
//! come straight from the radio model under the activity pattern implied by
//! the decisions.

use std::fmt;

use crate::association::DecisionVars;
use crate::geometry::Point;
use crate::radio::{rate_from_sinr, sinr_dbs, sinr_gbs, ActiveSet, Placement};
use crate::scenario::Scenario;

const TOL: f64 = 1e-9;

/// A violated constraint. Users and stations are reported by id, blocks and
/// sub-channels 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The user is not served by exactly one (station, sub-channel) pair.
    Assignment {
        user: u32,
        block: usize,
        total: f64,
    },
    RateFloor {
        user: u32,
        block: usize,
        rate: f64,
        threshold: f64,
    },
    GbsCapacity {
        gbs: u32,
        block: usize,
        load: f64,
        max: f64,
    },
    DbsCapacity {
        drone: u32,
        block: usize,
        load: f64,
        max: f64,
    },
    /// Drone marked in use without serving anyone.
    IdleDroneOn {
        drone: u32,
        block: usize,
    },
    /// Drone serves users but is not marked in use.
    BusyDroneOff {
        drone: u32,
        block: usize,
    },
    OutsideBox {
        drone: u32,
        block: usize,
        position: Point,
    },
    NotBinary {
        variable: String,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Assignment { user, block, total } => {
                write!(f, "user {user} in block {block} has association total {total}")
            }
            Violation::RateFloor {
                user,
                block,
                rate,
                threshold,
            } => {
                write!(f, "user {user} in block {block} gets {rate} bps/Hz, below {threshold}")
            }
            Violation::GbsCapacity { gbs, block, load, max } => {
                write!(
                    f,
                    "ground station {gbs} in block {block} carries {load} bps/Hz over {max}"
                )
            }
            Violation::DbsCapacity {
                drone,
                block,
                load,
                max,
            } => {
                write!(f, "drone {drone} in block {block} carries {load} bps/Hz over {max}")
            }
            Violation::IdleDroneOn { drone, block } => {
                write!(f, "drone {drone} is marked in use in block {block} but serves nobody")
            }
            Violation::BusyDroneOff { drone, block } => {
                write!(f, "drone {drone} serves users in block {block} but is marked idle")
            }
            Violation::OutsideBox { drone, block, position } => {
                write!(f, "drone {drone} in block {block} is at {position}, outside its box")
            }
            Violation::NotBinary { variable, value } => write!(f, "{variable} = {value} is not binary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditVerdict {
    pub violations: Vec<Violation>,
}

impl AuditVerdict {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn on(v: f64) -> bool {
    v == 1.0
}

/// Checks every constraint of the binary problem on `(x, placement)`.
pub fn audit(s: &Scenario, x: &DecisionVars, placement: &Placement) -> AuditVerdict {
    let dims = s.dims();
    let mut violations = Vec::new();

    let mut active = ActiveSet::silent(dims);
    for n in 0..dims.blocks {
        for u in 0..dims.users {
            for m in 0..dims.subchannels {
                for d in 0..dims.dbs {
                    let v = x.zeta(n, u, d, m);
                    if v != 0.0 && v != 1.0 {
                        violations.push(Violation::NotBinary {
                            variable: format!(
                                "zeta[block {}, user {}, drone {}, sub-channel {}]",
                                n + 1,
                                s.users[u].id,
                                s.dbs[d].id,
                                m + 1
                            ),
                            value: v,
                        });
                    }
                    if on(v) {
                        active.set_drone(n, d, m, true);
                    }
                }
                for l in 0..dims.gbs {
                    let v = x.eps(n, u, l, m);
                    if v != 0.0 && v != 1.0 {
                        violations.push(Violation::NotBinary {
                            variable: format!(
                                "eps[block {}, user {}, gbs {}, sub-channel {}]",
                                n + 1,
                                s.users[u].id,
                                s.gbs[l].id,
                                m + 1
                            ),
                            value: v,
                        });
                    }
                    if on(v) {
                        active.set_ground(n, l, m, true);
                    }
                }
            }
        }
        for d in 0..dims.dbs {
            let v = x.kappa(n, d);
            if v != 0.0 && v != 1.0 {
                violations.push(Violation::NotBinary {
                    variable: format!("kappa[block {}, drone {}]", n + 1, s.dbs[d].id),
                    value: v,
                });
            }
        }
    }

    for n in 0..dims.blocks {
        for (u, ue) in s.users.iter().enumerate() {
            let mut total = 0.0;
            let mut rate = 0.0;
            for m in 0..dims.subchannels {
                for d in 0..dims.dbs {
                    let v = x.zeta(n, u, d, m);
                    total += v;
                    if v != 0.0 {
                        let sinr = sinr_dbs(s, placement, &active, u, d, m, n).unwrap_or(0.0);
                        rate += v * rate_from_sinr(sinr);
                    }
                }
                for l in 0..dims.gbs {
                    let v = x.eps(n, u, l, m);
                    total += v;
                    if v != 0.0 {
                        let sinr = sinr_gbs(s, &active, u, l, m, n).unwrap_or(0.0);
                        rate += v * rate_from_sinr(sinr);
                    }
                }
            }
            if (total - 1.0).abs() > TOL {
                violations.push(Violation::Assignment {
                    user: ue.id,
                    block: n + 1,
                    total,
                });
            }
            if !(rate >= ue.rate_threshold) {
                violations.push(Violation::RateFloor {
                    user: ue.id,
                    block: n + 1,
                    rate,
                    threshold: ue.rate_threshold,
                });
            }
        }

        for (l, g) in s.gbs.iter().enumerate() {
            let mut load = s.own_user_rate_threshold * g.own_user_load[n] as f64;
            for (u, ue) in s.users.iter().enumerate() {
                for m in 0..dims.subchannels {
                    load += ue.rate_threshold * x.eps(n, u, l, m);
                }
            }
            if load > g.max_rate + TOL {
                violations.push(Violation::GbsCapacity {
                    gbs: g.id,
                    block: n + 1,
                    load,
                    max: g.max_rate,
                });
            }
        }

        for (d, drone) in s.dbs.iter().enumerate() {
            let mut load = 0.0;
            let mut mass = 0.0;
            for (u, ue) in s.users.iter().enumerate() {
                for m in 0..dims.subchannels {
                    load += ue.rate_threshold * x.zeta(n, u, d, m);
                    mass += x.zeta(n, u, d, m);
                }
            }
            if load > drone.max_rate + TOL {
                violations.push(Violation::DbsCapacity {
                    drone: drone.id,
                    block: n + 1,
                    load,
                    max: drone.max_rate,
                });
            }
            let kappa = x.kappa(n, d);
            if !(kappa < 1.0 + mass / s.big_q) {
                violations.push(Violation::IdleDroneOn {
                    drone: drone.id,
                    block: n + 1,
                });
            }
            if kappa < mass / s.big_q - TOL {
                violations.push(Violation::BusyDroneOff {
                    drone: drone.id,
                    block: n + 1,
                });
            }
            let p = placement.get(n, d);
            if !p.is_finite() || !p.within(drone.box_min, drone.box_max) {
                violations.push(Violation::OutsideBox {
                    drone: drone.id,
                    block: n + 1,
                    position: p,
                });
            }
        }
    }

    AuditVerdict { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Station;
    use crate::scenario::{generate_random_scenario, GeneratorConfig};

    fn small() -> Scenario {
        let mut cfg = GeneratorConfig::new(3, 2, 1, 1, 200.0);
        cfg.num_subchannels = 2;
        cfg.num_blocks = 1;
        let mut s = generate_random_scenario(&cfg);
        s.gbs[0].own_user_load = vec![0];
        s
    }

    /// Both users on the drone, one per sub-channel, drone hovering between them.
    fn feasible(s: &Scenario) -> (DecisionVars, Placement) {
        let mut x = DecisionVars::zeros(s.dims());
        x.assign(0, 0, Station::Drone(0), 0);
        x.assign(0, 1, Station::Drone(0), 1);
        x.derive_kappa();
        let mut p = Placement::initial(s);
        let mid = Point::new(
            (s.users[0].position.x + s.users[1].position.x) / 2.0,
            (s.users[0].position.y + s.users[1].position.y) / 2.0,
        );
        p.set(0, 0, mid);
        (x, p)
    }

    #[test]
    fn feasible_solution_is_clean() {
        let s = small();
        let (x, p) = feasible(&s);
        assert_eq!(audit(&s, &x, &p).violations, vec![]);
    }

    #[test]
    fn double_assignment_is_flagged() {
        let s = small();
        let (mut x, p) = feasible(&s);
        x.set_zeta(0, 0, 0, 1, 1.0);
        let v = audit(&s, &x, &p).violations;
        assert!(
            v.iter()
                .any(|v| matches!(v, Violation::Assignment { user: 1, block: 1, .. })),
            "{v:?}"
        );
    }

    #[test]
    fn drone_outside_box_is_flagged() {
        let s = small();
        let (x, mut p) = feasible(&s);
        p.set(0, 0, Point::new(500.0, 0.0));
        let v = audit(&s, &x, &p).violations;
        assert!(
            v.iter()
                .any(|v| matches!(v, Violation::OutsideBox { drone: 1, block: 1, .. })),
            "{v:?}"
        );
    }

    #[test]
    fn kappa_links_are_checked() {
        let s = small();
        let (mut x, p) = feasible(&s);
        x.set_kappa(0, 0, 0.0);
        assert!(audit(&s, &x, &p)
            .violations
            .contains(&Violation::BusyDroneOff { drone: 1, block: 1 }));

        let mut idle = DecisionVars::zeros(s.dims());
        idle.assign(0, 0, Station::Ground(0), 0);
        idle.assign(0, 1, Station::Ground(0), 1);
        idle.set_kappa(0, 0, 1.0);
        assert!(audit(&s, &idle, &p)
            .violations
            .contains(&Violation::IdleDroneOn { drone: 1, block: 1 }));
    }

    #[test]
    fn fractional_values_are_flagged() {
        let s = small();
        let (mut x, p) = feasible(&s);
        x.set_zeta(0, 0, 0, 0, 0.5);
        x.set_eps(0, 0, 0, 0, 0.5);
        let v = audit(&s, &x, &p).violations;
        assert!(v.iter().any(|v| matches!(v, Violation::NotBinary { .. })));
    }

    #[test]
    fn capacity_and_rate_violations() {
        let mut s = small();
        s.dbs[0].max_rate = 3.0;
        s.users[1].rate_threshold = 1e3;
        let (x, p) = feasible(&s);
        let v = audit(&s, &x, &p).violations;
        assert!(v.iter().any(|v| matches!(v, Violation::DbsCapacity { drone: 1, .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::RateFloor { user: 2, .. })));
    }
}
