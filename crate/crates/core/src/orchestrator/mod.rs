//! The outer loop: alternate association and placement until the healing
//! energy settles, keeping the best feasible iterate.

mod audit;
mod report;

use std::time::{Duration, Instant};

use log::{debug, info, warn};

pub use audit::{audit, AuditVerdict, Violation};
pub use report::{IterationStatus, IterationTrace, SolutionReport};

use crate::association::{
    build_lp, reconstruct_binary, solve_lp, BlockScope, DecisionVars, LpError, LpOptions, ReconstructError,
};
use crate::placement::{sca_round, ScaState, ScaTraceRow};
use crate::power::EnergyBreakdown;
use crate::radio::{build_rate_table, ActiveSet, Placement, RateTable};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Stop once the relative change of the energy is at most this.
    pub eps_th: f64,
    /// Solve the association block by block instead of all blocks at once.
    pub per_block: bool,
    pub capacity_cut: bool,
    /// Placement rounds per outer iteration.
    pub sca_rounds: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            eps_th: 1e-3,
            per_block: true,
            capacity_cut: true,
            sca_rounds: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no feasible association in block {block}: {reason} (blocking users: {users:?})")]
    NoFeasibleSolution {
        block: usize,
        users: Vec<u32>,
        reason: String,
    },
}

/// Why one association attempt failed.
#[derive(Debug, Clone)]
struct AssocFailure {
    block: usize,
    users: Vec<u32>,
    reason: String,
}

impl AssocFailure {
    fn from_lp(block: usize, e: LpError) -> Self {
        let users = match e {
            LpError::UnreachableUser { user, .. } => vec![user],
            _ => Vec::new(),
        };
        Self {
            block,
            users,
            reason: e.to_string(),
        }
    }

    fn from_reconstruct(block: usize, e: ReconstructError) -> Self {
        let ReconstructError::Infeasible { user, .. } = e;
        Self {
            block,
            users: vec![user],
            reason: e.to_string(),
        }
    }
}

struct Association {
    vars: DecisionVars,
    /// Placement after reconstruction, which may move idle drones.
    placement: Placement,
    lp_objective: f64,
    retried: bool,
}

/// LP then reconstruction for `blocks`, with earlier blocks of `done` fixed.
fn associate_once(
    s: &Scenario,
    placement: &Placement,
    rates: &RateTable,
    done: &DecisionVars,
    scope: BlockScope,
    capacity_cut: bool,
) -> Result<(DecisionVars, Placement, f64), AssocFailure> {
    let blocks: Vec<usize> = match scope {
        BlockScope::Joint => (0..s.num_blocks).collect(),
        BlockScope::Single(n) => vec![n],
    };
    let first = blocks[0];
    let opts = LpOptions {
        scope,
        capacity_cut,
        prune_weak_links: true,
    };
    let model = build_lp(s, rates, done, &opts).map_err(|e| AssocFailure::from_lp(first, e))?;
    let relaxed = solve_lp(&model).map_err(|e| AssocFailure::from_lp(first, e))?;
    let mut start = relaxed.vars.clone();
    for n in 0..first {
        start.copy_block(done, n);
    }
    let (binary, moved) = reconstruct_binary(&start, s, placement, &blocks).map_err(|e| {
        let ReconstructError::Infeasible { block, .. } = e;
        AssocFailure::from_reconstruct(block - 1, e)
    })?;
    Ok((binary, moved, relaxed.objective))
}

/// Association step under the current placement. Rates come from the
/// current activity pattern; if that fails, from a silent network, where
/// every link is at its interference-free rate.
fn associate(
    s: &Scenario,
    placement: &Placement,
    active: &ActiveSet,
    opts: &RunOptions,
) -> Result<Association, AssocFailure> {
    let dims = s.dims();
    let rates = build_rate_table(s, placement, active);
    let mut silent: Option<RateTable> = None;
    let mut silent_rates = || -> RateTable {
        silent
            .get_or_insert_with(|| build_rate_table(s, placement, &ActiveSet::silent(dims)))
            .clone()
    };

    let scopes: Vec<BlockScope> = if opts.per_block {
        (0..dims.blocks).map(BlockScope::Single).collect()
    } else {
        vec![BlockScope::Joint]
    };

    let mut vars = DecisionVars::zeros(dims);
    let mut lp_objective = 0.0;
    let mut retried = false;
    let mut moved = placement.clone();
    for scope in scopes {
        let attempt = associate_once(s, &moved, &rates, &vars, scope, opts.capacity_cut).or_else(|first| {
            debug!("association retry without interference: {}", first.reason);
            retried = true;
            associate_once(s, &moved, &silent_rates(), &vars, scope, opts.capacity_cut)
        })?;
        let (solved, next, obj) = attempt;
        moved = next;
        match scope {
            BlockScope::Joint => vars = solved,
            BlockScope::Single(n) => vars.copy_block(&solved, n),
        }
        lp_objective += obj;
    }
    vars.binary = vars.is_integral(0.0);
    Ok(Association {
        vars,
        placement: moved,
        lp_objective,
        retried,
    })
}

struct Iterate {
    vars: DecisionVars,
    placement: Placement,
    energy: EnergyBreakdown,
    verdict: AuditVerdict,
}

/// Runs the alternating optimization on `s`.
pub fn run(s: &Scenario, opts: &RunOptions) -> Result<SolutionReport, RunError> {
    if opts.max_iters == 0 {
        return Err(RunError::Options("max_iters must be at least 1".into()));
    }
    if !(opts.eps_th > 0.0) {
        return Err(RunError::Options("eps_th must be positive".into()));
    }
    s.validate()?;

    let dims = s.dims();
    let mut placement = Placement::initial(s);
    let mut active = ActiveSet::conventional(dims);
    let mut current: Option<Iterate> = None;
    let mut best: Option<Iterate> = None;
    let mut trace: Vec<IterationTrace> = Vec::new();
    let mut sca_trace: Vec<ScaTraceRow> = Vec::new();
    let mut prev_objective: Option<f64> = None;

    for r in 1..=opts.max_iters {
        let started = Instant::now();
        let (status, lp_objective, margins) = match associate(s, &placement, &active, opts) {
            Ok(assoc) => {
                let x = assoc.vars;
                let mut state = ScaState::new(s, assoc.placement, &x);
                let mut margins = vec![state.min_margin()];
                for _ in 0..opts.sca_rounds {
                    let round = sca_round(s, &state, &x);
                    margins.push(round.min_margin_after);
                    sca_trace.extend(round.trace.into_iter().map(|mut row| {
                        row.round += (r - 1) * opts.sca_rounds;
                        row
                    }));
                    state = round.state;
                }
                placement = state.anchor;
                active = x.active_set();
                let verdict = audit(s, &x, &placement);
                if !verdict.is_feasible() {
                    warn!("iteration {r}: audit found {} violations", verdict.violations.len());
                }
                let it = Iterate {
                    energy: EnergyBreakdown::compute(s, &x),
                    vars: x,
                    placement: placement.clone(),
                    verdict,
                };
                let improves =
                    it.verdict.is_feasible() && best.as_ref().is_none_or(|b| it.energy.total() < b.energy.total());
                if improves {
                    best = Some(Iterate {
                        vars: it.vars.clone(),
                        placement: it.placement.clone(),
                        energy: it.energy.clone(),
                        verdict: it.verdict.clone(),
                    });
                }
                current = Some(it);
                let status = if assoc.retried {
                    IterationStatus::Retried
                } else {
                    IterationStatus::Solved
                };
                (status, Some(assoc.lp_objective), margins)
            }
            Err(fail) => {
                if current.is_none() {
                    return Err(RunError::NoFeasibleSolution {
                        block: fail.block + 1,
                        users: fail.users,
                        reason: fail.reason,
                    });
                }
                debug!(
                    "iteration {r}: association failed ({}), keeping previous iterate",
                    fail.reason
                );
                (IterationStatus::KeptPrevious, None, Vec::new())
            }
        };

        let cur = current.as_ref().expect("an iterate exists");
        let objective = cur.energy.total();
        trace.push(IterationTrace {
            iteration: r,
            status,
            objective_j: objective,
            best_objective_j: best.as_ref().map(|b| b.energy.total()),
            lp_objective_j: lp_objective,
            min_margins: margins,
            active_drones: (0..dims.blocks).map(|n| cur.vars.active_drone_count(n)).collect(),
            wall_time: started.elapsed(),
        });

        if let Some(prev) = prev_objective {
            let change = (objective - prev).abs();
            let scale = prev.abs();
            if change <= opts.eps_th * scale || (scale == 0.0 && change == 0.0) {
                debug!("converged after {r} iterations");
                break;
            }
        }
        prev_objective = Some(objective);
    }

    let chosen = match best {
        Some(b) => b,
        None => current.expect("an iterate exists"),
    };
    let rates = build_rate_table(s, &chosen.placement, &chosen.vars.active_set());
    info!(
        "healing energy {:.1} J over {} iterations, feasible: {}",
        chosen.energy.total(),
        trace.len(),
        chosen.verdict.is_feasible()
    );
    Ok(SolutionReport {
        vars: chosen.vars,
        placement: chosen.placement,
        rates,
        energy: chosen.energy,
        trace,
        verdict: chosen.verdict,
        sca_trace,
    })
}

/// Total wall time of a trace.
pub fn total_wall_time(trace: &[IterationTrace]) -> Duration {
    trace.iter().map(|t| t.wall_time).sum()
}
