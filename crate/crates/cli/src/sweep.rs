//! Trials over a range of user counts. Trial `t` uses seed `seed + t` at
//! every user count, so counts differ only in the users added on top.

use std::io;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use skyheal::orchestrator::{run, RunOptions};
use skyheal::scenario::generate_random_scenario;

use crate::GenArgs;

#[derive(Args)]
pub struct SweepArgs {
    /// User counts, `A..B` (inclusive) or a single count.
    #[arg(long, default_value = "4..10", value_parser = parse_range)]
    users: RangeInclusive<usize>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    trials: u32,
    #[command(flatten)]
    gen: GenArgs,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(text: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad user count {t:?}: {e}"))
    };
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let n = num(text)?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("empty or zero user range {text:?}"));
    }
    Ok(lo..=hi)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    users: usize,
    trials: u32,
    feasible_trials: u32,
    mean_active_drones: f64,
    mean_dbs_energy_j: f64,
    mean_gbs_energy_j: f64,
}

/// Mean active drones per block, DBS and GBS energy of one trial, or `None`
/// if it had no feasible healing.
fn trial(gen: &GenArgs, users: usize, seed: u64) -> Option<(f64, f64, f64)> {
    let s = generate_random_scenario(&gen.config(seed, users));
    let rep = run(&s, &RunOptions::default()).ok().filter(|r| r.is_feasible())?;
    let drones = rep.active_drones();
    let mean_drones = drones.iter().sum::<usize>() as f64 / drones.len() as f64;
    Some((mean_drones, rep.energy.dbs_total(), rep.energy.gbs_total()))
}

pub fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let jobs: Vec<(usize, u32)> = a
        .users
        .clone()
        .flat_map(|u| (0..a.trials).map(move |t| (u, t)))
        .collect();
    let results: Vec<Option<(f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(u, t)| trial(&a.gen, u, a.gen.seed + t as u64))
        .collect();

    let rows: Vec<SweepRow> = a
        .users
        .clone()
        .zip(results.chunks(a.trials as usize))
        .map(|(users, chunk)| {
            let ok: Vec<&(f64, f64, f64)> = chunk.iter().flatten().collect();
            let mean = |f: fn(&(f64, f64, f64)) -> f64| {
                if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            SweepRow {
                users,
                trials: a.trials,
                feasible_trials: ok.len() as u32,
                mean_active_drones: mean(|r| r.0),
                mean_dbs_energy_j: mean(|r| r.1),
                mean_gbs_energy_j: mean(|r| r.2),
            }
        })
        .collect();

    let sink: Box<dyn io::Write> = match &a.out {
        Some(path) => {
            Box::new(std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::parse_range;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("4..10"), Ok(4..=10));
        assert_eq!(parse_range("4..=6"), Ok(4..=6));
        assert_eq!(parse_range("7"), Ok(7..=7));
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("5..4").is_err());
        assert!(parse_range("x").is_err());
    }
}
