//! Hand-built instances, one per qualitative healing regime.
//!
//! Four ground stations sit on a 2.5 km ring around the failed cell, so a
//! user beside one of them is out of reach of the other three and a user at
//! the centre is out of reach of all four. Two users stand 100 m inside the
//! ring next to each station; the drones may roam the square inscribed in
//! the ring. One time block, four sub-channels.

use super::{generate_random_scenario, GeneratorConfig, LoadProfile, Scenario, UserEquipment};
use crate::geometry::Point;

const RING: f64 = 2500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every station has room: nothing to heal with drones.
    GroundOnly,
    /// Five extra users at the centre, beyond ground reach; one drone's rate
    /// budget is exactly five users.
    OutOfReach,
    /// The first station is full; its neighbours are not.
    OneSaturated,
    /// Every station is full.
    AllSaturated,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::GroundOnly,
        Regime::OutOfReach,
        Regime::OneSaturated,
        Regime::AllSaturated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::GroundOnly => "ground-only",
            Regime::OutOfReach => "out-of-reach",
            Regime::OneSaturated => "one-saturated",
            Regime::AllSaturated => "all-saturated",
        }
    }
}

/// Index of the ground station user `u` of a regime scenario stands next
/// to, or `None` for the centre users of [`Regime::OutOfReach`].
pub fn home_station(s: &Scenario, u: usize) -> Option<usize> {
    let p = s.users[u].position;
    s.gbs.iter().position(|g| g.position.dist(p) < 0.5 * RING)
}

pub fn regime_scenario(regime: Regime) -> Scenario {
    let mut cfg = GeneratorConfig::new(0, 1, 4, 4, RING / 1.5);
    cfg.num_blocks = 1;
    cfg.load = LoadProfile::Fixed(0);
    let mut s = generate_random_scenario(&cfg);

    let mut users = Vec::new();
    for g in &s.gbs {
        let k = 1.0 - 100.0 / RING;
        let inward = Point::new(k * g.position.x, k * g.position.y);
        let side = Point::new(-g.position.y * 40.0 / RING, g.position.x * 40.0 / RING);
        users.push(inward + side);
        users.push(inward - side);
    }
    if regime == Regime::OutOfReach {
        for k in 0..5 {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
            users.push(Point::new(30.0 * angle.cos(), 30.0 * angle.sin()));
        }
    }
    s.users = users
        .into_iter()
        .enumerate()
        .map(|(i, position)| UserEquipment {
            id: i as u32 + 1,
            position,
            rate_threshold: 2.0,
        })
        .collect();

    let cap = (s.gbs[0].max_rate / s.own_user_rate_threshold).floor() as u32;
    for (l, g) in s.gbs.iter_mut().enumerate() {
        let full = match regime {
            Regime::GroundOnly | Regime::OutOfReach => false,
            Regime::OneSaturated => l == 0,
            Regime::AllSaturated => true,
        };
        g.own_user_load = vec![if full { cap } else { 0 }];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_and_homes_are_consistent() {
        for r in Regime::ALL {
            let s = regime_scenario(r);
            s.validate().unwrap();
            let homeless = (0..s.num_users()).filter(|&u| home_station(&s, u).is_none()).count();
            assert_eq!(homeless, if r == Regime::OutOfReach { 5 } else { 0 }, "{}", r.name());
        }
    }
}
