//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without the libtest harness so the lines always show.

use std::fmt::Write as _;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use skyheal::association::{build_lp, solve_lp, DecisionVars, LpOptions};
use skyheal::geometry::Point;
use skyheal::oracle::{brute_force, tiny_corpus};
use skyheal::orchestrator::{audit, run, RunError, RunOptions, SolutionReport};
use skyheal::placement::{rate_first_term, taylor_rate_lower_bound};
use skyheal::radio::{ActiveSet, Placement, RateTable, Station};
use skyheal::scenario::{
    generate_random_scenario, home_station, regime_scenario, GeneratorConfig, LoadProfile, Regime, Scenario,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// The 100 random scenarios shared by the fidelity, rate-floor and
/// monotonicity checks.
fn random_scenarios() -> Vec<Scenario> {
    (0..100u64)
        .map(|seed| {
            let mut cfg = GeneratorConfig::new(seed, 1 + (seed % 10) as usize, 4, 4, 200.0);
            cfg.num_subchannels = 1 + (seed % 4) as usize;
            cfg.num_blocks = 1 + (seed / 4 % 2) as usize;
            cfg.load = match seed % 3 {
                0 => LoadProfile::Uniform,
                _ => LoadProfile::NearCapacity {
                    max_spare: (seed / 3 % 4) as u32,
                },
            };
            generate_random_scenario(&cfg)
        })
        .collect()
}

struct Batch {
    scenarios: Vec<Scenario>,
    reports: Vec<Result<SolutionReport, RunError>>,
    elapsed: Duration,
}

fn solve_batch() -> Batch {
    let scenarios = random_scenarios();
    let started = Instant::now();
    let reports = scenarios.iter().map(|s| run(s, &RunOptions::default())).collect();
    Batch {
        scenarios,
        reports,
        elapsed: started.elapsed(),
    }
}

fn constraint_fidelity(b: &Batch) -> Outcome {
    let mut feasible = 0;
    let mut none = 0;
    let mut bad = String::new();
    for (i, (s, r)) in b.scenarios.iter().zip(&b.reports).enumerate() {
        match r {
            Ok(rep) if rep.is_feasible() => {
                feasible += 1;
                let verdict = audit(s, &rep.vars, &rep.placement);
                if !verdict.is_feasible() {
                    let _ = write!(bad, " #{i}: {:?}", verdict.violations);
                }
            }
            Ok(_) => {}
            Err(RunError::NoFeasibleSolution { .. }) => none += 1,
            Err(e) => {
                let _ = write!(bad, " #{i}: {e}");
            }
        }
    }
    let fast = b.elapsed < Duration::from_secs(60);
    Outcome::new(
        bad.is_empty() && fast && feasible > 0,
        format!(
            "{feasible} feasible reports audited clean, {none} without a feasible healing, {:.2?} total{bad}",
            b.elapsed
        ),
    )
}

fn rate_floor(b: &Batch) -> Outcome {
    let mut checked = 0;
    let mut low = Vec::new();
    for (s, rep) in b.scenarios.iter().zip(&b.reports) {
        let Ok(rep) = rep else { continue };
        if !rep.is_feasible() {
            continue;
        }
        for n in 0..s.num_blocks {
            for (u, ue) in s.users.iter().enumerate() {
                checked += 1;
                match rep.user_rate(n, u) {
                    Some(r) if r >= ue.rate_threshold => {}
                    r => low.push((ue.id, n + 1, r)),
                }
            }
        }
    }
    Outcome::new(
        low.is_empty() && checked > 0,
        format!(
            "{checked} user-block rates checked, {} below threshold {:?}",
            low.len(),
            low
        ),
    )
}

fn sca_soundness() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_anchor = 0.0f64;
    let mut pairs = 0;
    for inst in 0..10u64 {
        let mut cfg = GeneratorConfig::new(1000 + inst, 6, 4, 4, 200.0);
        cfg.num_subchannels = 2;
        cfg.num_blocks = 1;
        let s = generate_random_scenario(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(inst);
        let mut active = ActiveSet::silent(s.dims());
        for d in 0..s.num_dbs() {
            for m in 0..s.num_subchannels {
                active.set_drone(0, d, m, rng.gen_bool(0.6));
            }
        }
        let random_placement = |rng: &mut ChaCha8Rng| {
            let mut p = Placement::initial(&s);
            for (d, drone) in s.dbs.iter().enumerate() {
                let x = rng.gen_range(drone.box_min.x..=drone.box_max.x);
                let y = rng.gen_range(drone.box_min.y..=drone.box_max.y);
                p.set(0, d, Point::new(x, y));
            }
            p
        };
        for _ in 0..1000 {
            let anchor = random_placement(&mut rng);
            let query = random_placement(&mut rng);
            let u = rng.gen_range(0..s.num_users());
            let d = rng.gen_range(0..s.num_dbs());
            let m = rng.gen_range(0..s.num_subchannels);
            let exact = rate_first_term(&s, &query, &active, u, d, m, 0);
            let bound = taylor_rate_lower_bound(&s, &anchor, &query, &active, u, d, m, 0);
            worst_gap = worst_gap.max(bound - exact);
            let at = rate_first_term(&s, &anchor, &active, u, d, m, 0);
            let tight = taylor_rate_lower_bound(&s, &anchor, &anchor, &active, u, d, m, 0);
            worst_anchor = worst_anchor.max((tight - at).abs() / at.abs().max(f64::MIN_POSITIVE));
            pairs += 1;
        }
    }
    Outcome::new(
        worst_gap <= 1e-9 && worst_anchor <= 1e-12,
        format!("{pairs} pairs; max(bound - rate) = {worst_gap:.3e}, max relative anchor gap = {worst_anchor:.3e}"),
    )
}

struct OracleRow {
    oracle: Option<f64>,
    lp: Result<f64, String>,
    heuristic: Result<f64, String>,
}

fn oracle_rows() -> (Vec<OracleRow>, Duration) {
    let started = Instant::now();
    let rows = tiny_corpus(20)
        .iter()
        .map(|s| {
            let oracle = brute_force(s, 10.0).ok().map(|r| r.energy);
            let lp = build_lp(
                s,
                &RateTable::upper_bound(s),
                &DecisionVars::zeros(s.dims()),
                &LpOptions::default(),
            )
            .map_err(|e| e.to_string())
            .and_then(|m| solve_lp(&m).map(|r| r.objective).map_err(|e| e.to_string()));
            let heuristic = run(s, &RunOptions::default()).map_err(|e| e.to_string()).and_then(|r| {
                if r.is_feasible() {
                    Ok(r.energy.total())
                } else {
                    Err("audit failed".into())
                }
            });
            OracleRow { oracle, lp, heuristic }
        })
        .collect();
    (rows, started.elapsed())
}

fn lp_bound(rows: &[OracleRow]) -> Outcome {
    let mut compared = 0;
    let mut bad = String::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(opt) = row.oracle else { continue };
        compared += 1;
        match &row.lp {
            Ok(lp) if *lp <= opt + 1e-6 => {}
            Ok(lp) => {
                let _ = write!(bad, " #{}: {lp} > {opt}", i + 1);
            }
            Err(e) => {
                let _ = write!(bad, " #{}: {e}", i + 1);
            }
        }
    }
    Outcome::new(
        bad.is_empty() && compared > 0,
        format!("{compared}/{} instances with an optimum compared{bad}", rows.len()),
    )
}

fn near_optimality(rows: &[OracleRow], elapsed: Duration) -> Outcome {
    let mut worst: f64 = 1.0;
    let mut compared = 0;
    let mut bad = String::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(opt) = row.oracle else { continue };
        compared += 1;
        match &row.heuristic {
            Ok(h) => {
                let ratio = if opt > 0.0 {
                    h / opt
                } else if *h == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(ratio);
                if ratio > 1.10 {
                    let _ = write!(bad, " #{}: ratio {ratio:.4}", i + 1);
                }
            }
            Err(e) => {
                let _ = write!(bad, " #{}: {e}", i + 1);
            }
        }
    }
    Outcome::new(
        bad.is_empty() && compared > 0 && elapsed < Duration::from_secs(300),
        format!("{compared} instances, worst ratio {worst:.4}, {elapsed:.2?} with the oracle{bad}"),
    )
}

fn skyheal(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_skyheal"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn sweep_trend() -> Outcome {
    let out = skyheal(&[
        "sweep",
        "--users",
        "4..10",
        "--trials",
        "10",
        "--profile",
        "near-capacity",
    ]);
    if !out.status.success() {
        return Outcome::new(false, format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<(usize, f64, f64, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap();
            (rec[0].parse().unwrap(), f(3), f(4), f(5))
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    let dominant = rows.iter().all(|&(_, drones, dbs, gbs)| drones == 0.0 || dbs > gbs);
    let drones: Vec<String> = rows.iter().map(|r| format!("{}:{:.2}", r.0, r.1)).collect();
    Outcome::new(
        monotone && dominant && rows.len() == 7,
        format!(
            "mean active drones {}; drone energy above ground energy wherever drones fly: {dominant}",
            drones.join(" ")
        ),
    )
}

fn regimes() -> Outcome {
    let mut bad = Vec::new();
    for regime in Regime::ALL {
        let s = regime_scenario(regime);
        let rep = match run(&s, &RunOptions::default()) {
            Ok(rep) if rep.is_feasible() => rep,
            _ => {
                bad.push(format!("{} infeasible", regime.name()));
                continue;
            }
        };
        let drone = |u: usize| matches!(rep.vars.assignment(0, u), Some((Station::Drone(_), _)));
        let users = 0..s.num_users();
        let ok = match regime {
            Regime::GroundOnly => rep.active_drones() == [0],
            Regime::OutOfReach => users.clone().all(|u| drone(u) == home_station(&s, u).is_none()),
            Regime::OneSaturated => {
                rep.active_drones()[0] >= 1 && users.clone().all(|u| drone(u) == (home_station(&s, u) == Some(0)))
            }
            Regime::AllSaturated => users.clone().all(drone),
        };
        if !ok {
            bad.push(regime.name().to_string());
        }
    }
    Outcome::new(bad.is_empty(), format!("4 regimes, mismatched: {bad:?}"))
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let mut differ = Vec::new();
    for tag in ["a", "b"] {
        let out = p(tag);
        skyheal(&[
            "run",
            "--users",
            "8",
            "--seed",
            "42",
            "--profile",
            "near-capacity",
            "--sca-trace",
            "--out",
            &out,
        ]);
    }
    for name in [
        "associations.csv",
        "energy.csv",
        "trace.csv",
        "rates.csv",
        "sca_trace.csv",
    ] {
        let a = std::fs::read(dir.path().join("a").join(name));
        let b = std::fs::read(dir.path().join("b").join(name));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => differ.push(name.to_string()),
        }
    }
    for cmd in [
        &[
            "sweep",
            "--users",
            "4..6",
            "--trials",
            "3",
            "--seed",
            "7",
            "--profile",
            "near-capacity",
        ][..],
        &["oracle", "--corpus", "4"][..],
    ] {
        let (a, b) = (skyheal(cmd), skyheal(cmd));
        if !a.status.success() || a.stdout != b.stdout {
            differ.push(cmd[0].to_string());
        }
    }
    Outcome::new(
        differ.is_empty(),
        format!("run, sweep and oracle repeated; differing outputs: {differ:?}"),
    )
}

fn monotone_reporting(b: &Batch) -> Outcome {
    let mut traces = 0;
    let mut bad = String::new();
    for (i, r) in b.reports.iter().enumerate() {
        let Ok(rep) = r else { continue };
        traces += 1;
        let best: Vec<f64> = rep.trace.iter().filter_map(|t| t.best_objective_j).collect();
        if best.windows(2).any(|w| w[1] > w[0]) {
            let _ = write!(bad, " #{i}: best-so-far rose");
        }
        for t in &rep.trace {
            if t.min_margins.windows(2).any(|w| w[1] < w[0] - 1e-8) {
                let _ = write!(bad, " #{i} iteration {}: margin fell {:?}", t.iteration, t.min_margins);
            }
        }
    }
    Outcome::new(bad.is_empty() && traces > 0, format!("{traces} traces checked{bad}"))
}

fn main() -> ExitCode {
    let batch = solve_batch();
    let (rows, oracle_time) = oracle_rows();
    let results = [
        ("constraint fidelity", constraint_fidelity(&batch)),
        ("rate floor", rate_floor(&batch)),
        ("placement bound soundness", sca_soundness()),
        ("relaxation bound", lp_bound(&rows)),
        ("near-optimality", near_optimality(&rows, oracle_time)),
        ("user-count trend", sweep_trend()),
        ("healing regimes", regimes()),
        ("determinism", determinism()),
        ("monotone reporting", monotone_reporting(&batch)),
    ];
    let mut all = true;
    for (i, (name, o)) in results.iter().enumerate() {
        all &= o.pass;
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
