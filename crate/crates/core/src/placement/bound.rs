//! The concave lower bound on a drone link's rate used by the placement step.
//!
//! A drone link's rate splits as `R = R1 - R2` with
//! `R1 = log2(sum_{j in A} c_j / (h_j^2 + x_j) + noise)` over the serving drone
//! and every co-channel drone, and `R2` the same sum without the serving drone;
//! `x_j` is the squared horizontal distance from drone `j` to the user and
//! `c_j = p_j * rho0`. `R1` is convex in the `x_j`, so its tangent is a global
//! lower bound, and the tangent is concave in the drone coordinates.

use std::f64::consts::LOG2_E;

use crate::geometry::Point;
use crate::radio::{ActiveSet, Placement};
use crate::scenario::Scenario;

/// One drone's term in the power sum: `c / (h^2 + x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PowerTerm {
    pub drone: usize,
    /// `p * rho0`
    pub c: f64,
    /// Squared altitude.
    pub h2: f64,
}

/// The serving drone followed by the other drones active on `m` in block `n`.
pub(crate) fn signal_terms(s: &Scenario, active: &ActiveSet, d: usize, m: usize, n: usize) -> Vec<PowerTerm> {
    let term = |j: usize| {
        let drone = &s.dbs[j];
        PowerTerm {
            drone: j,
            c: drone.per_subchannel_power * s.radio.rho0,
            h2: drone.altitude * drone.altitude,
        }
    };
    std::iter::once(d)
        .chain(active.drones_on(n, m).filter(|&j| j != d))
        .map(term)
        .collect()
}

fn power_sum(terms: &[PowerTerm], positions: &[Point], g: Point, noise: f64) -> f64 {
    terms
        .iter()
        .map(|t| t.c / (t.h2 + positions[t.drone].dist_sq(g)))
        .sum::<f64>()
        + noise
}

/// `R1` for user `u` served by drone `d` on `m` in block `n`.
pub fn rate_first_term(
    s: &Scenario,
    placement: &Placement,
    active: &ActiveSet,
    u: usize,
    d: usize,
    m: usize,
    n: usize,
) -> f64 {
    let terms = signal_terms(s, active, d, m, n);
    power_sum(&terms, &placement.coords[n], s.users[u].position, s.noise_power()).log2()
}

/// First-order expansion of `R1` in the squared distances around `anchor`,
/// evaluated at `query`. Never exceeds [`rate_first_term`] at `query` and
/// equals it when `query == anchor`.
#[allow(clippy::too_many_arguments)]
pub fn taylor_rate_lower_bound(
    s: &Scenario,
    anchor: &Placement,
    query: &Placement,
    active: &ActiveSet,
    u: usize,
    d: usize,
    m: usize,
    n: usize,
) -> f64 {
    let g = s.users[u].position;
    let terms = signal_terms(s, active, d, m, n);
    let expansion = Expansion::new(&terms, &anchor.coords[n], g, s.noise_power());
    expansion.eval(&query.coords[n], g)
}

/// `log2(S_r) - sum_j Z_j (x_j - x_j(r))` with `Z_j` the negated partial
/// derivative of `R1` in `x_j` at the anchor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Expansion {
    /// `log2(S_r) + sum_j Z_j x_j(r)`
    pub offset: f64,
    /// `(drone, Z_j)`
    pub slopes: Vec<(usize, f64)>,
}

impl Expansion {
    pub fn new(terms: &[PowerTerm], anchor: &[Point], g: Point, noise: f64) -> Self {
        let total = power_sum(terms, anchor, g, noise);
        let mut offset = total.log2();
        let slopes = terms
            .iter()
            .map(|t| {
                let x = anchor[t.drone].dist_sq(g);
                let z = LOG2_E * t.c / ((t.h2 + x) * (t.h2 + x)) / total;
                offset += z * x;
                (t.drone, z)
            })
            .collect();
        Self { offset, slopes }
    }

    pub fn eval(&self, positions: &[Point], g: Point) -> f64 {
        self.offset
            - self
                .slopes
                .iter()
                .map(|&(j, z)| z * positions[j].dist_sq(g))
                .sum::<f64>()
    }
}
