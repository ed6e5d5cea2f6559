//! `skyheal`: run, sweep and check the outage compensation engine from the
//! command line. Log verbosity follows `RUST_LOG` (default `warn`).

mod sweep;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use skyheal::association::{build_lp, BlockScope, DecisionVars, LpOptions};
use skyheal::oracle::{brute_force, tiny_corpus, OracleError};
use skyheal::orchestrator::{run, RunError, RunOptions, SolutionReport};
use skyheal::radio::{build_rate_table, ActiveSet, Placement};
use skyheal::scenario::{
    generate_random_scenario, load_scenario, regime_scenario, save_scenario, GeneratorConfig, LoadProfile, Regime,
    Scenario,
};

#[derive(Parser)]
#[command(name = "skyheal", version, about = "Hybrid ground/drone cell outage compensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write its CSV outputs.
    Run(RunArgs),
    /// Mean energies and drone counts over seeded trials per user count.
    Sweep(sweep::SweepArgs),
    /// Compare the heuristic with exhaustive search on tiny instances.
    Oracle(OracleArgs),
    /// Write a scenario file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Profile {
    /// Own-user load uniform between zero and capacity.
    Uniform,
    /// Stations within `--max-spare` users of capacity.
    NearCapacity,
    /// No own users at all.
    Idle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    GroundOnly,
    OutOfReach,
    OneSaturated,
    AllSaturated,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::GroundOnly => Regime::GroundOnly,
            RegimeArg::OutOfReach => Regime::OutOfReach,
            RegimeArg::OneSaturated => Regime::OneSaturated,
            RegimeArg::AllSaturated => Regime::AllSaturated,
        }
    }
}

/// Random instance parameters.
#[derive(Args, Clone, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "gbs", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub num_gbs: u32,
    #[arg(long = "dbs", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub num_dbs: u32,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub subchannels: u32,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub blocks: u32,
    /// Half width of the square the users are drawn from, meters.
    #[arg(long, default_value_t = 200.0)]
    pub half_width: f64,
    #[arg(long, value_enum, default_value_t = Profile::Uniform)]
    pub profile: Profile,
    /// Spare user slots per station for `near-capacity`.
    #[arg(long, default_value_t = 1)]
    pub max_spare: u32,
}

impl GenArgs {
    pub fn config(&self, seed: u64, users: usize) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::new(
            seed,
            users,
            self.num_gbs as usize,
            self.num_dbs as usize,
            self.half_width,
        );
        cfg.num_subchannels = self.subchannels as usize;
        cfg.num_blocks = self.blocks as usize;
        cfg.load = match self.profile {
            Profile::Uniform => LoadProfile::Uniform,
            Profile::NearCapacity => LoadProfile::NearCapacity {
                max_spare: self.max_spare,
            },
            Profile::Idle => LoadProfile::Fixed(0),
        };
        cfg
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "users")]
    scenario: Option<PathBuf>,
    /// Generate a random scenario with this many users instead.
    #[arg(long, required_unless_present = "scenario", value_parser = clap::value_parser!(u32).range(1..))]
    users: Option<u32>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    /// Relative energy change that stops the outer loop.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Solve the association block by block (the default).
    #[arg(long, conflicts_with = "joint")]
    per_block: bool,
    /// Solve the association for all blocks at once.
    #[arg(long)]
    joint: bool,
    /// Leave out the drone capacity cut.
    #[arg(long)]
    no_cut: bool,
    /// Placement rounds per outer iteration.
    #[arg(long, default_value_t = 1)]
    sca_rounds: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the first association LP as `association.lp`.
    #[arg(long)]
    dump_lp: bool,
    /// Also write the per-drone placement trace as `sca_trace.csv`.
    #[arg(long)]
    sca_trace: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Scenario file; otherwise the built-in tiny corpus.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Instances taken from the tiny corpus.
    #[arg(long, default_value_t = 20)]
    corpus: usize,
    /// Drone grid spacing, meters.
    #[arg(long, default_value_t = 10.0)]
    grid_step: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Write one of the hand-built regime scenarios.
    #[arg(long, value_enum, conflicts_with = "users")]
    regime: Option<RegimeArg>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    users: u32,
    #[command(flatten)]
    gen: GenArgs,
}

/// Exit 1: no feasible healing; exit 2: bad input or I/O.
#[derive(Debug)]
enum Failure {
    Infeasible(String),
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => sweep::cmd_sweep(a).map_err(Failure::Input),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Generate(a) => cmd_generate(a).map_err(Failure::Input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    let s = load_scenario(path)?;
    s.validate()?;
    Ok(s)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    f(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let s = match (&a.scenario, a.users) {
        (Some(path), _) => load(path)?,
        (None, Some(users)) => generate_random_scenario(&a.gen.config(a.gen.seed, users as usize)),
        (None, None) => unreachable!("clap requires one of --scenario and --users"),
    };
    let opts = RunOptions {
        max_iters: a.max_iters as usize,
        eps_th: a.eps,
        per_block: !a.joint,
        capacity_cut: !a.no_cut,
        sca_rounds: a.sca_rounds,
    };
    let rep = match run(&s, &opts) {
        Ok(rep) => rep,
        Err(e @ RunError::NoFeasibleSolution { .. }) => return Err(Failure::Infeasible(e.to_string())),
        Err(e) => return Err(Failure::Input(e.into())),
    };

    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_outputs(&s, &rep, &a)?;
    println!("{}", rep.summary());
    if !rep.is_feasible() {
        let list: Vec<String> = rep.verdict.violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::Infeasible(list.join("; ")));
    }
    Ok(())
}

fn write_outputs(s: &Scenario, rep: &SolutionReport, a: &RunArgs) -> anyhow::Result<()> {
    let dir = a.out.as_path();
    write_file(dir, "associations.csv", |w| Ok(rep.write_associations(s, w)?))?;
    write_file(dir, "energy.csv", |w| Ok(rep.write_energy(s, w)?))?;
    write_file(dir, "trace.csv", |w| Ok(rep.write_trace(w)?))?;
    write_file(dir, "rates.csv", |w| Ok(rep.write_rates(s, w)?))?;
    if a.sca_trace {
        write_file(dir, "sca_trace.csv", |w| Ok(rep.write_sca_trace(w)?))?;
    }
    if a.dump_lp {
        let dims = s.dims();
        let rates = build_rate_table(s, &Placement::initial(s), &ActiveSet::conventional(dims));
        let lp_opts = LpOptions {
            scope: if a.joint {
                BlockScope::Joint
            } else {
                BlockScope::Single(0)
            },
            capacity_cut: !a.no_cut,
            ..LpOptions::default()
        };
        match build_lp(s, &rates, &DecisionVars::zeros(dims), &lp_opts) {
            Ok(model) => write_file(dir, "association.lp", |w| Ok(model.write_lp_format(w)?))?,
            Err(e) => warn!("first association LP not written: {e}"),
        }
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let instances = match &a.scenario {
        Some(path) => vec![load(path)?],
        None => tiny_corpus(a.corpus),
    };
    let mut out = io::stdout().lock();
    let mut io_err = |e: io::Error| Failure::Input(e.into());
    writeln!(out, "instance,oracle_energy_j,heuristic_energy_j,ratio").map_err(&mut io_err)?;
    for (i, s) in instances.iter().enumerate() {
        let exact = brute_force(s, a.grid_step).map_err(|e| match e {
            OracleError::Infeasible => Failure::Infeasible(format!("instance {}: {e}", i + 1)),
            e => Failure::Input(e.into()),
        })?;
        let heur =
            run(s, &RunOptions::default()).map_err(|e| Failure::Infeasible(format!("instance {}: {e}", i + 1)))?;
        let (o, h) = (exact.energy, heur.energy.total());
        let ratio = if o > 0.0 {
            h / o
        } else if h == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        writeln!(out, "{},{o},{h},{ratio}", i + 1).map_err(&mut io_err)?;
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<()> {
    let s = match a.regime {
        Some(r) => regime_scenario(r.into()),
        None => generate_random_scenario(&a.gen.config(a.gen.seed, a.users as usize)),
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_scenario(&s, &a.out)?;
    Ok(())
}
