//! User association: the relaxed linear program over `zeta`, `eps` and
//! `kappa` for a fixed drone placement, and the reconstruction of a binary
//! assignment from its solution.

mod lp_format;
mod reconstruct;
pub mod simplex;
mod vars;

use std::fmt;

use log::debug;

pub use reconstruct::{reconstruct_binary, ReconstructError};
pub use vars::{station_pairs, DecisionVars};

use crate::power::{drone_block_cost, drone_link_cost, drone_travel_cost, gbs_link_cost};
use crate::radio::{RateTable, Station};
use crate::scenario::{DroneEnergyAccounting, Scenario};
use simplex::{Cmp, Constraint, LinearProgram, SimplexError};

/// A column of the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Zeta {
        n: usize,
        u: usize,
        d: usize,
        m: usize,
    },
    Eps {
        n: usize,
        u: usize,
        l: usize,
        m: usize,
    },
    Kappa {
        n: usize,
        d: usize,
    },
    /// Switch-on indicator `w >= kappa[n] - kappa[n-1]`, joint mode only.
    Rise {
        n: usize,
        d: usize,
    },
}

/// What a row of the LP expresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowClass {
    /// Every user is served by exactly one (station, sub-channel) pair.
    Assignment,
    /// Every user reaches its rate threshold.
    RateFloor,
    GbsCapacity,
    DbsCapacity,
    /// `kappa` may be 1 only if the drone serves someone.
    KappaUpper,
    /// `kappa` is 1 if the drone serves anyone.
    KappaLower,
    /// Drone capacity scaled by `kappa`; redundant for binaries.
    CapacityCut,
    /// Switch-on indicator.
    Rise,
}

impl fmt::Display for RowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowClass::Assignment => "assignment",
            RowClass::RateFloor => "rate floor",
            RowClass::GbsCapacity => "ground capacity",
            RowClass::DbsCapacity => "drone capacity",
            RowClass::KappaUpper => "drone usage upper link",
            RowClass::KappaLower => "drone usage lower link",
            RowClass::CapacityCut => "drone capacity cut",
            RowClass::Rise => "drone switch-on",
        };
        f.write_str(s)
    }
}

/// Which blocks the LP covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockScope {
    /// All blocks at once, with switch-on variables coupling them.
    Joint,
    /// Block `n` only; usage in block `n - 1` is read from the previous
    /// decisions.
    Single(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptions {
    pub scope: BlockScope,
    /// Add `sum R_th * zeta <= R_max * kappa` per drone.
    pub capacity_cut: bool,
    /// Fix to zero every link whose rate is below the user's threshold.
    pub prune_weak_links: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            scope: BlockScope::Joint,
            capacity_cut: true,
            prune_weak_links: true,
        }
    }
}

/// Blocks are 1-based.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("user {user} cannot reach its rate threshold on any link in block {block}")]
    UnreachableUser { user: u32, block: usize },
    #[error("association LP is infeasible; failing constraints: {}", fmt_classes(.classes))]
    Infeasible { classes: Vec<RowClass>, rows: Vec<String> },
    #[error("LP solver failure: {0}")]
    Solver(SimplexError),
}

fn fmt_classes(classes: &[RowClass]) -> String {
    classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

/// The relaxed association problem for a fixed placement.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    pub lp: LinearProgram,
    pub vars: Vec<Var>,
    pub row_class: Vec<RowClass>,
    pub row_name: Vec<String>,
    /// Energy not attached to any variable.
    pub constant: f64,
    pub blocks: Vec<usize>,
    dims: crate::scenario::Dims,
    var_name: Vec<String>,
}

impl LpModel {
    pub fn num_rows(&self) -> usize {
        self.row_class.len()
    }

    pub fn count(&self, class: RowClass) -> usize {
        self.row_class.iter().filter(|&&c| c == class).count()
    }

    pub fn var_name(&self, j: usize) -> &str {
        &self.var_name[j]
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp_format<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        lp_format::write(self, out)
    }
}

struct Builder<'a> {
    s: &'a Scenario,
    lp: LinearProgram,
    vars: Vec<Var>,
    var_name: Vec<String>,
    row_class: Vec<RowClass>,
    row_name: Vec<String>,
}

impl Builder<'_> {
    fn var(&mut self, v: Var, cost: f64, upper: f64) -> usize {
        let s = self.s;
        let name = match v {
            Var::Zeta { n, u, d, m } => {
                format!("zeta_b{}_u{}_d{}_m{}", n + 1, s.users[u].id, s.dbs[d].id, m + 1)
            }
            Var::Eps { n, u, l, m } => {
                format!("eps_b{}_u{}_g{}_m{}", n + 1, s.users[u].id, s.gbs[l].id, m + 1)
            }
            Var::Kappa { n, d } => format!("kappa_b{}_d{}", n + 1, s.dbs[d].id),
            Var::Rise { n, d } => format!("rise_b{}_d{}", n + 1, s.dbs[d].id),
        };
        self.vars.push(v);
        self.var_name.push(name);
        self.lp.objective.push(cost);
        self.lp.upper.push(upper);
        self.vars.len() - 1
    }

    fn row(&mut self, class: RowClass, name: String, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.lp.constraints.push(Constraint { coeffs, cmp, rhs });
        self.row_class.push(class);
        self.row_name.push(name);
    }
}

/// Builds the relaxed association LP.
///
/// `rates` must have been computed under the placement being held fixed.
/// `prev` supplies drone usage in the block before a single-block scope; it
/// is ignored in joint mode.
pub fn build_lp(s: &Scenario, rates: &RateTable, prev: &DecisionVars, opts: &LpOptions) -> Result<LpModel, LpError> {
    let dims = s.dims();
    let blocks: Vec<usize> = match opts.scope {
        BlockScope::Joint => (0..dims.blocks).collect(),
        BlockScope::Single(n) => vec![n],
    };

    for &n in &blocks {
        for (u, ue) in s.users.iter().enumerate() {
            let best = station_pairs(dims)
                .into_iter()
                .map(|(st, m)| rates.station(n, u, st, m))
                .fold(f64::NEG_INFINITY, f64::max);
            if best < ue.rate_threshold {
                return Err(LpError::UnreachableUser {
                    user: ue.id,
                    block: n + 1,
                });
            }
        }
    }

    let mut b = Builder {
        s,
        lp: LinearProgram::default(),
        vars: Vec::new(),
        var_name: Vec::new(),
        row_class: Vec::new(),
        row_name: Vec::new(),
    };
    let mut constant = 0.0;
    let big_q = s.big_q;
    let mu = 1.0 / (2.0 * big_q);

    // Column indices per block: zeta[u][d][m], eps[u][l][m], kappa[d].
    let mut kappa_cols: Vec<Vec<usize>> = Vec::new();
    for &n in &blocks {
        let mut zeta = vec![vec![vec![0; dims.subchannels]; dims.dbs]; dims.users];
        let mut eps = vec![vec![vec![0; dims.subchannels]; dims.gbs]; dims.users];
        for u in 0..dims.users {
            let th = s.users[u].rate_threshold;
            for l in 0..dims.gbs {
                for m in 0..dims.subchannels {
                    let ub = if opts.prune_weak_links && rates.gbs(n, u, l, m) < th {
                        0.0
                    } else {
                        1.0
                    };
                    eps[u][l][m] = b.var(Var::Eps { n, u, l, m }, gbs_link_cost(s, l), ub);
                }
            }
            for d in 0..dims.dbs {
                for m in 0..dims.subchannels {
                    let ub = if opts.prune_weak_links && rates.dbs(n, u, d, m) < th {
                        0.0
                    } else {
                        1.0
                    };
                    zeta[u][d][m] = b.var(Var::Zeta { n, u, d, m }, drone_link_cost(s, d), ub);
                }
            }
        }

        let mut kappa = Vec::with_capacity(dims.dbs);
        for d in 0..dims.dbs {
            let mut cost = drone_block_cost(s, d);
            match s.drone_energy {
                DroneEnergyAccounting::Gated => {
                    if let BlockScope::Single(_) = opts.scope {
                        let was_on = n > 0 && prev.kappa(n - 1, d) > 0.5;
                        if !was_on {
                            cost += drone_travel_cost(s, d);
                        }
                    }
                }
                DroneEnergyAccounting::Literal => {
                    cost += drone_travel_cost(s, d);
                    constant += s.block_duration * s.dbs[d].beta;
                }
            }
            kappa.push(b.var(Var::Kappa { n, d }, cost, 1.0));
        }

        for u in 0..dims.users {
            let uid = s.users[u].id;
            let mut assign = Vec::new();
            let mut rate = Vec::new();
            for l in 0..dims.gbs {
                for m in 0..dims.subchannels {
                    assign.push((eps[u][l][m], 1.0));
                    rate.push((eps[u][l][m], rates.gbs(n, u, l, m)));
                }
            }
            for d in 0..dims.dbs {
                for m in 0..dims.subchannels {
                    assign.push((zeta[u][d][m], 1.0));
                    rate.push((zeta[u][d][m], rates.dbs(n, u, d, m)));
                }
            }
            b.row(
                RowClass::Assignment,
                format!("assign_b{}_u{uid}", n + 1),
                assign,
                Cmp::Eq,
                1.0,
            );
            b.row(
                RowClass::RateFloor,
                format!("rate_b{}_u{uid}", n + 1),
                rate,
                Cmp::Ge,
                s.users[u].rate_threshold,
            );
        }

        for (l, g) in s.gbs.iter().enumerate() {
            let mut coeffs = Vec::new();
            for u in 0..dims.users {
                for m in 0..dims.subchannels {
                    coeffs.push((eps[u][l][m], s.users[u].rate_threshold));
                }
            }
            let own = s.own_user_rate_threshold * g.own_user_load[n] as f64;
            b.row(
                RowClass::GbsCapacity,
                format!("gcap_b{}_g{}", n + 1, g.id),
                coeffs,
                Cmp::Le,
                g.max_rate - own,
            );
        }

        for (d, drone) in s.dbs.iter().enumerate() {
            let did = drone.id;
            let mut load = Vec::new();
            let mut count = Vec::new();
            for u in 0..dims.users {
                for m in 0..dims.subchannels {
                    load.push((zeta[u][d][m], s.users[u].rate_threshold));
                    count.push((zeta[u][d][m], -1.0 / big_q));
                }
            }
            b.row(
                RowClass::DbsCapacity,
                format!("dcap_b{}_d{did}", n + 1),
                load.clone(),
                Cmp::Le,
                drone.max_rate,
            );
            let mut upper = count.clone();
            upper.push((kappa[d], 1.0));
            b.row(
                RowClass::KappaUpper,
                format!("kup_b{}_d{did}", n + 1),
                upper,
                Cmp::Le,
                1.0 - mu,
            );
            let mut lower = count;
            lower.push((kappa[d], 1.0));
            b.row(
                RowClass::KappaLower,
                format!("klo_b{}_d{did}", n + 1),
                lower,
                Cmp::Ge,
                0.0,
            );
            if opts.capacity_cut {
                let mut cut = load;
                cut.push((kappa[d], -drone.max_rate));
                b.row(
                    RowClass::CapacityCut,
                    format!("cut_b{}_d{did}", n + 1),
                    cut,
                    Cmp::Le,
                    0.0,
                );
            }
        }
        kappa_cols.push(kappa);
    }

    if opts.scope == BlockScope::Joint && s.drone_energy == DroneEnergyAccounting::Gated {
        for (k, &n) in blocks.iter().enumerate() {
            for d in 0..dims.dbs {
                let w = b.var(Var::Rise { n, d }, drone_travel_cost(s, d), 1.0);
                let mut coeffs = vec![(w, 1.0), (kappa_cols[k][d], -1.0)];
                if k > 0 {
                    coeffs.push((kappa_cols[k - 1][d], 1.0));
                }
                b.row(
                    RowClass::Rise,
                    format!("rise_b{}_d{}", n + 1, s.dbs[d].id),
                    coeffs,
                    Cmp::Ge,
                    0.0,
                );
            }
        }
    }

    Ok(LpModel {
        lp: b.lp,
        vars: b.vars,
        row_class: b.row_class,
        row_name: b.row_name,
        constant,
        blocks,
        dims,
        var_name: b.var_name,
    })
}

/// Optimal relaxed decisions of an [`LpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Values for the model's blocks; other blocks are zero.
    pub vars: DecisionVars,
    /// Energy in joules, constant included.
    pub objective: f64,
    pub iterations: usize,
}

/// Values this close to 0 or 1 are snapped.
const SNAP: f64 = 1e-9;

pub fn solve_lp(model: &LpModel) -> Result<RelaxedSolution, LpError> {
    let sol = simplex::solve(&model.lp).map_err(|e| match e {
        SimplexError::Infeasible { rows } => {
            let mut classes: Vec<RowClass> = rows.iter().map(|&r| model.row_class[r]).collect();
            classes.sort();
            classes.dedup();
            LpError::Infeasible {
                classes,
                rows: rows.iter().map(|&r| model.row_name[r].clone()).collect(),
            }
        }
        other => LpError::Solver(other),
    })?;
    debug!(
        "LP solved: {} columns, {} rows, {} pivots, objective {:.3}",
        model.vars.len(),
        model.num_rows(),
        sol.iterations,
        sol.objective + model.constant
    );

    let mut x = DecisionVars::zeros(model.dims);
    for (j, v) in model.vars.iter().enumerate() {
        let mut val = sol.x[j];
        if val.abs() < SNAP {
            val = 0.0;
        } else if (val - 1.0).abs() < SNAP {
            val = 1.0;
        }
        match *v {
            Var::Zeta { n, u, d, m } => x.set_mass(n, u, Station::Drone(d), m, val),
            Var::Eps { n, u, l, m } => x.set_mass(n, u, Station::Ground(l), m, val),
            Var::Kappa { n, d } => x.set_kappa(n, d, val),
            Var::Rise { .. } => {}
        }
    }
    x.binary = x.is_integral(0.0);
    Ok(RelaxedSolution {
        vars: x,
        objective: sol.objective + model.constant,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::power::EnergyBreakdown;
    use crate::scenario::{DronePowerParams, DroneStation, GroundStation, RadioParams, UserEquipment};

    pub(crate) fn tiny(users: usize, own_load: u32) -> Scenario {
        Scenario {
            users: (0..users)
                .map(|i| UserEquipment {
                    id: i as u32 + 1,
                    position: Point::new(10.0 * i as f64, 0.0),
                    rate_threshold: 2.0,
                })
                .collect(),
            gbs: vec![GroundStation {
                id: 1,
                position: Point::new(0.0, 100.0),
                height: 30.0,
                per_subchannel_power: 0.1,
                alpha: 4.7,
                alpha_tilde: 5.64,
                beta: 130.0,
                own_user_load: vec![own_load],
                max_rate: 100.0,
            }],
            dbs: vec![DroneStation {
                id: 1,
                initial_position: Point::new(0.0, 0.0),
                altitude: 100.0,
                per_subchannel_power: 0.1,
                alpha: 2.6,
                beta: 1.0,
                power: DronePowerParams::default(),
                max_rate: 10.0,
                box_min: Point::new(-200.0, -200.0),
                box_max: Point::new(200.0, 200.0),
            }],
            num_subchannels: 1,
            num_blocks: 1,
            block_duration: 3600.0,
            flight_time: 30.0,
            radio: RadioParams::default(),
            big_q: 1000.0,
            own_user_rate_threshold: 2.0,
            drone_energy: DroneEnergyAccounting::Gated,
        }
    }

    fn flat_rates(s: &Scenario, gbs: f64, dbs: f64) -> RateTable {
        let mut t = RateTable::zeros(s.dims());
        for u in 0..s.num_users() {
            for m in 0..s.num_subchannels {
                for l in 0..s.num_gbs() {
                    t.set_gbs(0, u, l, m, gbs);
                }
                for d in 0..s.num_dbs() {
                    t.set_dbs(0, u, d, m, dbs);
                }
            }
        }
        t
    }

    fn prev(s: &Scenario) -> DecisionVars {
        DecisionVars::zeros(s.dims())
    }

    #[test]
    fn row_counts() {
        let s = tiny(2, 0);
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap();
        assert_eq!(model.count(RowClass::Assignment), 2);
        assert_eq!(model.count(RowClass::RateFloor), 2);
        assert_eq!(model.count(RowClass::GbsCapacity), 1);
        assert_eq!(model.count(RowClass::DbsCapacity), 1);
        assert_eq!(model.count(RowClass::KappaUpper) + model.count(RowClass::KappaLower), 2);
        assert_eq!(model.vars.len(), 2 * 2 + 1 + 1);
    }

    #[test]
    fn saturated_gbs_has_no_room() {
        let s = tiny(1, 50);
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap();
        let row = model
            .row_class
            .iter()
            .position(|&c| c == RowClass::GbsCapacity)
            .unwrap();
        assert_eq!(model.lp.constraints[row].rhs, 0.0);
        let sol = solve_lp(&model).unwrap();
        assert_eq!(sol.vars.eps(0, 0, 0, 0), 0.0);
    }

    #[test]
    fn kappa_lower_link_arithmetic() {
        // Three units of drone mass force kappa >= 3 / Q.
        let s = tiny(3, 50);
        let opts = LpOptions {
            capacity_cut: false,
            ..LpOptions::default()
        };
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &opts).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert!((sol.vars.drone_load(0, 0) - 3.0).abs() < 1e-9);
        assert!((sol.vars.kappa(0, 0) - 0.003).abs() < 1e-12);
    }

    #[test]
    fn single_user_prefers_ground() {
        let s = tiny(1, 0);
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert_eq!(sol.vars.eps(0, 0, 0, 0), 1.0);
        assert_eq!(sol.vars.zeta(0, 0, 0, 0), 0.0);
        assert_eq!(sol.vars.kappa(0, 0), 0.0);
        // Brute force over the two binary associations.
        let mut on_gbs = prev(&s);
        on_gbs.assign(0, 0, Station::Ground(0), 0);
        let mut on_dbs = prev(&s);
        on_dbs.assign(0, 0, Station::Drone(0), 0);
        on_dbs.derive_kappa();
        let best = EnergyBreakdown::compute(&s, &on_gbs)
            .total()
            .min(EnergyBreakdown::compute(&s, &on_dbs).total());
        assert!((sol.objective - best).abs() < 1e-6);
        assert!((sol.objective - 2030.4).abs() < 1e-6);
    }

    #[test]
    fn zero_gbs_capacity_uses_drone() {
        let s = tiny(1, 50);
        let opts = LpOptions {
            capacity_cut: false,
            ..LpOptions::default()
        };
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &opts).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert_eq!(sol.vars.zeta(0, 0, 0, 0), 1.0);
        assert!(sol.vars.kappa(0, 0) >= 1.0 / s.big_q - 1e-12);
        let cut =
            solve_lp(&build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap()).unwrap();
        assert_eq!(cut.vars.zeta(0, 0, 0, 0), 1.0);
        assert!((cut.vars.kappa(0, 0) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn ties_go_to_lowest_station() {
        let mut s = tiny(1, 0);
        let mut twin = s.gbs[0].clone();
        twin.id = 2;
        s.gbs.push(twin);
        s.num_subchannels = 2;
        for g in &mut s.gbs {
            g.own_user_load = vec![0];
        }
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert_eq!(sol.vars.assignment(0, 0), Some((Station::Ground(0), 0)));
        assert_eq!(sol.vars.eps(0, 0, 0, 0), 1.0);
    }

    #[test]
    fn unreachable_user_is_reported() {
        let s = tiny(2, 0);
        let mut t = flat_rates(&s, 5.0, 5.0);
        t.set_gbs(0, 1, 0, 0, 1.0);
        t.set_dbs(0, 1, 0, 0, 1.9);
        assert_eq!(
            build_lp(&s, &t, &prev(&s), &LpOptions::default()),
            Err(LpError::UnreachableUser { user: 2, block: 1 })
        );
    }

    #[test]
    fn infeasible_hint_names_capacity() {
        // Six users, the drone holds five and the ground station none.
        let s = tiny(6, 50);
        let err = solve_lp(&build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap());
        match err {
            Err(LpError::Infeasible { rows, .. }) => assert!(!rows.is_empty()),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn joint_and_single_agree_on_one_block() {
        let s = tiny(3, 49);
        let t = flat_rates(&s, 5.0, 5.0);
        let joint = solve_lp(&build_lp(&s, &t, &prev(&s), &LpOptions::default()).unwrap()).unwrap();
        let single = solve_lp(
            &build_lp(
                &s,
                &t,
                &prev(&s),
                &LpOptions {
                    scope: BlockScope::Single(0),
                    ..LpOptions::default()
                },
            )
            .unwrap(),
        )
        .unwrap();
        assert!((joint.objective - single.objective).abs() < 1e-6);
    }

    #[test]
    fn objective_matches_energy_on_binary_points() {
        // Coefficients are the exact slopes of the affine energy.
        let s = tiny(2, 0);
        let model = build_lp(&s, &flat_rates(&s, 5.0, 5.0), &prev(&s), &LpOptions::default()).unwrap();
        let mut x = prev(&s);
        x.assign(0, 0, Station::Drone(0), 0);
        x.assign(0, 1, Station::Ground(0), 0);
        x.derive_kappa();
        let mut col = vec![0.0; model.vars.len()];
        for (j, v) in model.vars.iter().enumerate() {
            col[j] = match *v {
                Var::Zeta { n, u, d, m } => x.zeta(n, u, d, m),
                Var::Eps { n, u, l, m } => x.eps(n, u, l, m),
                Var::Kappa { n, d } => x.kappa(n, d),
                Var::Rise { n, d } => x.kappa(n, d),
            };
        }
        let lp_energy: f64 = col.iter().zip(&model.lp.objective).map(|(a, b)| a * b).sum::<f64>() + model.constant;
        assert!((lp_energy - EnergyBreakdown::compute(&s, &x).total()).abs() < 1e-6);
        assert!(simplex::max_violation(&model.lp, &col) < 1e-12);
    }
}
