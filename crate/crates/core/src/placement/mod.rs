//! Drone placement for fixed association decisions, by successive convex
//! approximation.
//!
//! Around an anchor placement every drone link's rate margin is replaced by a
//! concave under-estimate: the signal-plus-interference term by its tangent in
//! the squared distances (see [`bound`]) and each interferer's squared
//! distance, inside the interference term, by its tangent in the drone
//! coordinates. The slack `psi` of an interferer is set to that tangent, the
//! largest value it may take. The sum of the surrogate margins is then
//! maximized over the boxes by projected gradient ascent, never letting any
//! surrogate margin fall below the smallest true margin at the anchor. Since
//! every surrogate margin under-estimates the true one, the true minimum
//! margin cannot decrease.

mod bound;

use std::f64::consts::LOG2_E;
use std::io::Write;

use log::trace;
use serde::Serialize;

pub use bound::{rate_first_term, taylor_rate_lower_bound};

use crate::association::DecisionVars;
use crate::geometry::Point;
use crate::radio::{link_rate, Placement, Station};
use crate::scenario::Scenario;
use bound::{signal_terms, Expansion, PowerTerm};

/// Slack value for interferer `j` at user `u` in block `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEntry {
    pub block: usize,
    pub user: usize,
    pub drone: usize,
    /// Squared meters.
    pub value: f64,
}

/// Anchor placement and bookkeeping carried between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub anchor: Placement,
    pub round: usize,
    /// True rate margin `rate - threshold` per block and user under the
    /// anchor.
    pub margins: Vec<Vec<f64>>,
    pub psi: Vec<PsiEntry>,
}

impl ScaState {
    pub fn new(s: &Scenario, anchor: Placement, x: &DecisionVars) -> Self {
        let margins = true_margins(s, &anchor, x);
        Self {
            anchor,
            round: 0,
            margins,
            psi: Vec::new(),
        }
    }

    /// Smallest margin over all users and blocks, `+inf` without users.
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// True rate margin of every user under the decisions' activity pattern.
pub fn true_margins(s: &Scenario, placement: &Placement, x: &DecisionVars) -> Vec<Vec<f64>> {
    let active = x.active_set();
    (0..s.num_blocks)
        .map(|n| {
            (0..s.num_users())
                .map(|u| match x.assignment(n, u) {
                    Some((st, m)) => link_rate(s, placement, &active, u, st, m, n) - s.users[u].rate_threshold,
                    None => f64::NEG_INFINITY,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Interferer {
    term: PowerTerm,
    /// Anchor position of the interferer.
    at: Point,
}

/// Surrogate margin of one drone-served user.
#[derive(Debug, Clone, PartialEq)]
struct LinkTerm {
    user: usize,
    g: Point,
    threshold: f64,
    signal: Expansion,
    interferers: Vec<Interferer>,
}

impl LinkTerm {
    /// Linearized squared distance of interferer `i` at position `j`.
    fn psi(&self, i: &Interferer, j: Point) -> f64 {
        let a = i.at - self.g;
        let step = j - i.at;
        i.at.dist_sq(self.g) + 2.0 * (a.x * step.x + a.y * step.y)
    }

    fn margin(&self, positions: &[Point], noise: f64) -> f64 {
        let mut interference = noise;
        for i in &self.interferers {
            let denom = i.term.h2 + self.psi(i, positions[i.term.drone]);
            if denom <= 0.0 {
                return f64::NEG_INFINITY;
            }
            interference += i.term.c / denom;
        }
        self.signal.eval(positions, self.g) - interference.log2() - self.threshold
    }

    /// Adds the margin's gradient in the drone coordinates to `grad`.
    fn add_gradient(&self, positions: &[Point], noise: f64, grad: &mut [Point]) {
        for &(j, z) in &self.signal.slopes {
            let diff = positions[j] - self.g;
            grad[j].x -= 2.0 * z * diff.x;
            grad[j].y -= 2.0 * z * diff.y;
        }
        let mut interference = noise;
        let mut denoms = Vec::with_capacity(self.interferers.len());
        for i in &self.interferers {
            let denom = i.term.h2 + self.psi(i, positions[i.term.drone]);
            denoms.push(denom);
            interference += i.term.c / denom;
        }
        for (i, denom) in self.interferers.iter().zip(denoms) {
            let w = LOG2_E * i.term.c / (denom * denom * interference);
            let a = i.at - self.g;
            grad[i.term.drone].x += 2.0 * w * a.x;
            grad[i.term.drone].y += 2.0 * w * a.y;
        }
    }
}

/// The convex placement subproblem of one block around an anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaSubproblem {
    pub block: usize,
    /// Drones whose position is optimized; the others stay at the anchor.
    pub drones: Vec<usize>,
    anchor: Vec<Point>,
    box_min: Vec<Point>,
    box_max: Vec<Point>,
    links: Vec<LinkTerm>,
    noise: f64,
    /// Smallest true margin among the block's drone-served users at the anchor.
    pub floor: f64,
}

impl ScaSubproblem {
    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Surrogate margin of every drone-served user at `positions`.
    pub fn margins(&self, positions: &[Point]) -> Vec<f64> {
        self.links.iter().map(|l| l.margin(positions, self.noise)).collect()
    }

    /// Linearized slack of every (user, interferer) pair at `positions`.
    pub fn psi(&self, positions: &[Point]) -> Vec<PsiEntry> {
        let mut out = Vec::new();
        for l in &self.links {
            for i in &l.interferers {
                out.push(PsiEntry {
                    block: self.block,
                    user: l.user,
                    drone: i.term.drone,
                    value: l.psi(i, positions[i.term.drone]),
                });
            }
        }
        out
    }

    fn objective(&self, positions: &[Point]) -> (f64, f64) {
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for l in &self.links {
            let v = l.margin(positions, self.noise);
            sum += v;
            min = min.min(v);
        }
        (sum, min)
    }
}

/// Builds the placement subproblem of block `n` for binary decisions `x`.
pub fn build_sca_subproblem(s: &Scenario, state: &ScaState, x: &DecisionVars, n: usize) -> ScaSubproblem {
    let active = x.active_set();
    let anchor = state.anchor.coords[n].clone();
    let noise = s.noise_power();
    let mut links = Vec::new();
    for (u, ue) in s.users.iter().enumerate() {
        let Some((Station::Drone(d), m)) = x.assignment(n, u) else {
            continue;
        };
        let terms = signal_terms(s, &active, d, m, n);
        let interferers = terms[1..]
            .iter()
            .map(|&term| Interferer {
                term,
                at: anchor[term.drone],
            })
            .collect();
        links.push(LinkTerm {
            user: u,
            g: ue.position,
            threshold: ue.rate_threshold,
            signal: Expansion::new(&terms, &anchor, ue.position, noise),
            interferers,
        });
    }
    let drones = if links.is_empty() {
        Vec::new()
    } else {
        active.active_drones(n)
    };
    let mut sub = ScaSubproblem {
        block: n,
        drones,
        box_min: s.dbs.iter().map(|d| d.box_min).collect(),
        box_max: s.dbs.iter().map(|d| d.box_max).collect(),
        anchor,
        links,
        noise,
        floor: f64::NEG_INFINITY,
    };
    sub.floor = sub.objective(&sub.anchor).1;
    sub
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaStatus {
    /// Improvement fell below tolerance.
    Converged,
    IterationLimit,
    /// No ascent step was found down to the smallest trial step.
    StepUnderflow,
    /// Nothing to optimize.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaSolution {
    /// Positions of every drone in the block.
    pub positions: Vec<Point>,
    pub psi: Vec<PsiEntry>,
    /// Sum of surrogate margins.
    pub margin: f64,
    /// Smallest surrogate margin.
    pub min_margin: f64,
    pub iterations: usize,
    pub status: ScaStatus,
}

const MAX_ITERS: usize = 500;
const MIN_IMPROVEMENT: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// Projected gradient ascent on the sum of surrogate margins.
///
/// Works in box-normalized coordinates so that one unit of step spans a
/// whole box. Steps start at 1 and halve until the Armijo condition holds and
/// no surrogate margin is below the subproblem's floor.
pub fn solve_sca_subproblem(sub: &ScaSubproblem) -> ScaSolution {
    let mut pos = sub.anchor.clone();
    let (mut value, mut min) = sub.objective(&pos);
    if sub.drones.is_empty() || sub.links.is_empty() {
        return ScaSolution {
            psi: sub.psi(&pos),
            positions: pos,
            margin: value,
            min_margin: min,
            iterations: 0,
            status: ScaStatus::Empty,
        };
    }

    let width: Vec<Point> = sub.box_min.iter().zip(&sub.box_max).map(|(&lo, &hi)| hi - lo).collect();
    let mut status = ScaStatus::IterationLimit;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let mut grad = vec![Point::new(0.0, 0.0); pos.len()];
        for l in &sub.links {
            l.add_gradient(&pos, sub.noise, &mut grad);
        }
        // Gradient in normalized coordinates.
        for (g, w) in grad.iter_mut().zip(&width) {
            g.x *= w.x;
            g.y *= w.y;
        }

        let mut step = 1.0;
        let accepted = loop {
            let mut trial = pos.clone();
            let mut ascent = 0.0;
            for &d in &sub.drones {
                let w = width[d];
                let moved = Point::new(pos[d].x + step * grad[d].x * w.x, pos[d].y + step * grad[d].y * w.y)
                    .clamp(sub.box_min[d], sub.box_max[d]);
                if w.x > 0.0 {
                    ascent += grad[d].x * (moved.x - pos[d].x) / w.x;
                }
                if w.y > 0.0 {
                    ascent += grad[d].y * (moved.y - pos[d].y) / w.y;
                }
                trial[d] = moved;
            }
            if trial == pos {
                break None;
            }
            let (v, mn) = sub.objective(&trial);
            if mn >= sub.floor && v >= value + ARMIJO * ascent {
                break Some((trial, v, mn));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };

        let Some((trial, v, mn)) = accepted else {
            status = if iterations == 1 {
                ScaStatus::StepUnderflow
            } else {
                ScaStatus::Converged
            };
            break;
        };
        let gain = v - value;
        pos = trial;
        value = v;
        min = mn;
        if gain < MIN_IMPROVEMENT {
            status = ScaStatus::Converged;
            break;
        }
    }
    trace!(
        "block {}: placement subproblem {:?} after {iterations} iterations, margin sum {value:.6}",
        sub.block,
        status
    );
    ScaSolution {
        psi: sub.psi(&pos),
        positions: pos,
        margin: value,
        min_margin: min,
        iterations,
        status,
    }
}

/// One row of the per-round placement trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaTraceRow {
    pub round: usize,
    pub block: usize,
    pub drone: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub min_margin: f64,
    /// Largest gap between a link's true rate and its surrogate.
    pub bound_gap: f64,
}

/// Result of one SCA round.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaRound {
    pub state: ScaState,
    /// True minimum margin over all users before and after the round.
    pub min_margin_before: f64,
    pub min_margin_after: f64,
    pub status: Vec<ScaStatus>,
    pub trace: Vec<ScaTraceRow>,
}

/// One placement improvement for every block; the anchor moves to the
/// subproblem solution. A block whose true minimum margin would drop is left
/// at its anchor.
pub fn sca_round(s: &Scenario, state: &ScaState, x: &DecisionVars) -> ScaRound {
    let before = true_margins(s, &state.anchor, x);
    let mut next = state.anchor.clone();
    let mut psi = Vec::new();
    let mut status = Vec::with_capacity(s.num_blocks);
    let mut trace = Vec::new();
    let round = state.round + 1;

    for n in 0..s.num_blocks {
        let sub = build_sca_subproblem(s, state, x, n);
        let sol = solve_sca_subproblem(&sub);
        let mut candidate = next.clone();
        candidate.coords[n] = sol.positions.clone();

        let block_min = |p: &Placement| {
            true_margins(s, p, x)[n]
                .iter()
                .enumerate()
                .filter(|(u, _)| matches!(x.assignment(n, *u), Some((Station::Drone(_), _))))
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min)
        };
        let ok = block_min(&candidate) >= block_min(&next);
        if ok {
            next = candidate;
            psi.extend(sol.psi);
            status.push(sol.status);
        } else {
            psi.extend(sub.psi(&sub.anchor));
            status.push(ScaStatus::StepUnderflow);
        }

        let active = x.active_set();
        let true_now = true_margins(s, &next, x);
        let surrogate = sub.margins(&next.coords[n]);
        let gap = sub
            .links
            .iter()
            .zip(&surrogate)
            .map(|(l, &sm)| true_now[n][l.user] - sm)
            .fold(0.0f64, f64::max);
        for &d in &active.active_drones(n) {
            let p = next.get(n, d);
            trace.push(ScaTraceRow {
                round,
                block: n + 1,
                drone: s.dbs[d].id,
                x_m: p.x,
                y_m: p.y,
                min_margin: block_min(&next),
                bound_gap: gap,
            });
        }
    }

    let margins = true_margins(s, &next, x);
    let min_of = |m: &Vec<Vec<f64>>| m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    ScaRound {
        min_margin_before: min_of(&before),
        min_margin_after: min_of(&margins),
        state: ScaState {
            anchor: next,
            round,
            margins,
            psi,
        },
        status,
        trace,
    }
}

pub fn write_sca_trace<W: Write>(rows: &[ScaTraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
