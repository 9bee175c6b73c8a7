//! The four workflows behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use darepc_core::contract::{learn_contract, EnvDomain};
use darepc_core::darepc::{darepc, simulate_cells, validate_outcome, DarepcOutcome, OutcomeKind, SimSummary};
use darepc_core::env_grid::EnvGrid;
use darepc_core::error::ContractError;
use darepc_core::rng::{self, tag};
use darepc_core::system::{simulate, Plant};
use serde::Serialize;

use crate::config::{ExperimentConfig, PlantKind};
use crate::exec::Pool;
use crate::format::{self, Stamp, SweepRow};
use crate::scenario::Scenario;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Safe = 0,
    Config = 2,
    Solver = 3,
    Counterexample = 10,
    Inconclusive = 11,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

pub type Outcome = Result<Exit, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { exit: Exit::Config, error: e.into() }
}

fn solver_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { exit: Exit::Solver, error: e.into() }
}

fn contract_err(e: ContractError) -> Failure {
    match e {
        ContractError::InvalidParam(_) => config_err(e),
        e => solver_err(e),
    }
}

/// Settings shared by every command.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

impl RunContext {
    pub fn new(mut config: ExperimentConfig, seed: Option<u64>, out: PathBuf, jobs: usize) -> Self {
        if let Some(s) = seed {
            config.seed = s;
        }
        Self { config, out, jobs }
    }

    fn stamp(&self) -> Stamp {
        Stamp { config_hash: self.config.hash(), seed: self.config.seed }
    }

    fn scenario(&self) -> Result<Scenario, Failure> {
        Scenario::resolve(&self.config).map_err(config_err)
    }

    fn pool(&self) -> Result<Pool, Failure> {
        Pool::new(self.jobs).map_err(solver_err)
    }

    fn write(&self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(config_err)?;
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display())).map_err(config_err)
    }
}

fn plant_name(k: PlantKind) -> &'static str {
    match k {
        PlantKind::Autoland => "autoland",
        PlantKind::Dronerace => "dronerace",
    }
}

#[derive(Serialize)]
struct LearnReport {
    plant: &'static str,
    pr: f64,
    epsilon: f64,
    delta: f64,
    n_samples: usize,
    quantile: f64,
    empirical_conformance: f64,
    per_dim_coverage: Vec<f64>,
    clamp_count: usize,
    active_cells: usize,
}

/// Learns one contract over the full grid, as the first round of `verify` does.
pub fn learn(ctx: &RunContext) -> Outcome {
    let sc = ctx.scenario()?;
    let mut sampler = sc.training.clone();
    sampler.seed = rng::derive(sc.seed, tag::CONTRACT_SAMPLE, 0);
    let c = learn_contract(&sc.contract_domain, EnvDomain::Grid(&sc.grid), &sc.observer, &sc.params.learn, &sampler)
        .map_err(contract_err)?;
    let stamp = ctx.stamp();
    let k = &c.calibration;
    let report = LearnReport {
        plant: plant_name(sc.kind),
        pr: k.pr,
        epsilon: k.epsilon,
        delta: k.delta,
        n_samples: k.n_samples,
        quantile: k.quantile,
        empirical_conformance: k.empirical_conformance,
        per_dim_coverage: k.per_dim_coverage.clone(),
        clamp_count: k.clamp_count,
        active_cells: sc.grid.active_count(),
    };
    ctx.write("contract.txt", &format::write_contract(&c, &stamp))?;
    ctx.write("learn_report.toml", &format::write_report("learn-report", &report, &stamp).map_err(solver_err)?)?;
    eprintln!("learned from {} samples, empirical conformance {:.4}", k.n_samples, k.empirical_conformance);
    Ok(Exit::Safe)
}

#[derive(Serialize)]
struct SimReport {
    runs: usize,
    satisfied: usize,
    violated: usize,
    observations: usize,
    conforming: usize,
}

impl From<&SimSummary> for SimReport {
    fn from(s: &SimSummary) -> Self {
        Self { runs: s.runs, satisfied: s.satisfied, violated: s.violated, observations: s.observations, conforming: s.conforming }
    }
}

#[derive(Serialize)]
struct StatsReport {
    refinements_state: usize,
    refinements_env: usize,
    tubes_computed: usize,
    contracts_learned: usize,
    max_depth: usize,
}

#[derive(Serialize)]
struct OutcomeReport {
    plant: &'static str,
    outcome: OutcomeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
    active_cells: usize,
    removed_cells: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract_conformance: Option<f64>,
    cover_boxes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness_box: Option<Vec<[f64; 2]>>,
    stats: StatsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<SimReport>,
    /// Simulations under removed cells, after a safe outcome.
    #[serde(skip_serializing_if = "Option::is_none")]
    outside: Option<SimReport>,
}

/// Results of `verify` beyond the exit code, for callers that check them.
pub struct VerifyResult {
    pub outcome: DarepcOutcome,
    pub validation: Option<SimSummary>,
    pub outside: Option<SimSummary>,
}

/// Runs the refinement loop, validates by simulation and writes all
/// artifacts.
pub fn verify(ctx: &RunContext) -> Outcome {
    verify_full(ctx).map(|(exit, _)| exit)
}

pub fn verify_full(ctx: &RunContext) -> Result<(Exit, VerifyResult), Failure> {
    let sc = ctx.scenario()?;
    let pool = ctx.pool()?;
    let problem = sc.problem();
    let t0 = Instant::now();
    let mut out = darepc(&problem, &sc.grid, &sc.params, &pool);
    out.stats.wall_time = t0.elapsed().as_secs_f64();

    let validation = match out.kind {
        OutcomeKind::Inconclusive => None,
        _ => Some(
            validate_outcome(&out, &problem, sc.n_sims, rng::derive(sc.seed, tag::VALIDATE, 0)).map_err(solver_err)?.sims,
        ),
    };
    let removed = out.env.removed_cells();
    let outside = if out.kind == OutcomeKind::Safe && sc.n_outside > 0 && !removed.is_empty() {
        let s = simulate_cells(
            &sc.plant,
            &sc.observer,
            &sc.requirement,
            &sc.initial_set,
            &out.env,
            &removed,
            None,
            sc.n_outside,
            rng::derive(sc.seed, tag::VALIDATE, 1),
        )
        .map_err(solver_err)?;
        Some(s)
    } else {
        None
    };

    let stamp = ctx.stamp();
    let report = OutcomeReport {
        plant: plant_name(sc.kind),
        outcome: out.kind,
        diagnostic: out.diagnostic.clone(),
        active_cells: out.env.active_count(),
        removed_cells: removed,
        contract_conformance: out.contract.as_ref().map(|c| c.calibration.empirical_conformance),
        cover_boxes: out.cover.len(),
        witness_box: out.witness_state_box.as_ref().map(format::rect_pairs),
        stats: StatsReport {
            refinements_state: out.stats.refinements_state,
            refinements_env: out.stats.refinements_env,
            tubes_computed: out.stats.tubes_computed,
            contracts_learned: out.stats.contracts_learned,
            max_depth: out.stats.max_depth,
        },
        validation: validation.as_ref().map(SimReport::from),
        outside: outside.as_ref().map(SimReport::from),
    };
    ctx.write("outcome.toml", &format::write_report("outcome", &report, &stamp).map_err(solver_err)?)?;
    ctx.write("grid.csv", &format::write_grid(&out.env, &stamp))?;
    ctx.write("events.jsonl", &format::write_jsonl(&out.log, &stamp).map_err(solver_err)?)?;
    if let Some(c) = &out.contract {
        ctx.write("contract.txt", &format::write_contract(c, &stamp))?;
    }
    for cert in &out.cover {
        ctx.write(&format!("tubes/cover_{:05}.csv", cert.item), &format::write_tube(&cert.tube, &stamp))?;
    }
    if let Some(t) = &out.witness_tube {
        ctx.write("tubes/witness.csv", &format::write_tube(t, &stamp))?;
    }
    eprintln!(
        "{:?}: {} state refinements, {} env shrinks, {} tubes in {:.1} s",
        out.kind, out.stats.refinements_state, out.stats.refinements_env, out.stats.tubes_computed, out.stats.wall_time
    );

    let exit = match out.kind {
        OutcomeKind::Safe => Exit::Safe,
        OutcomeKind::Counterexample => Exit::Counterexample,
        OutcomeKind::Inconclusive if out.diagnostic.as_deref().is_some_and(|d| d.starts_with("contract learning failed")) => {
            Exit::Solver
        }
        OutcomeKind::Inconclusive => Exit::Inconclusive,
    };
    Ok((exit, VerifyResult { outcome: out, validation, outside }))
}

/// Overrides for `simulate`.
#[derive(Clone, Debug, Default)]
pub struct SimulateArgs {
    pub x0: Option<Vec<f64>>,
    pub env: Option<Vec<f64>>,
    pub horizon: Option<usize>,
}

/// One closed-loop run with the synthetic observer.
pub fn simulate_one(ctx: &RunContext, args: &SimulateArgs) -> Outcome {
    let sc = ctx.scenario()?;
    let cfg = &ctx.config.simulate;
    let x0 = args.x0.clone().or_else(|| cfg.x0.clone()).unwrap_or_else(|| sc.initial_set.center());
    let env = args.env.clone().or_else(|| cfg.env.clone()).unwrap_or_else(|| sc.grid.nominal().to_vec());
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(sc.horizon);
    let n = sc.plant.state_dim();
    if x0.len() != n {
        return Err(config_err(anyhow!("x0 has {} entries, the plant state has {n}", x0.len())));
    }
    if !sc.contract_domain.contains_point(&x0).map_err(config_err)? {
        return Err(config_err(anyhow!("x0 lies outside the plant's state domain")));
    }
    if env.len() != sc.grid.dim() || !sc.grid.bounds().contains_point(&env).map_err(config_err)? {
        return Err(config_err(anyhow!("env {env:?} lies outside the environment box")));
    }
    if horizon > sc.requirement.horizon() {
        return Err(config_err(anyhow!("horizon {horizon} exceeds the requirement horizon {}", sc.requirement.horizon())));
    }
    let traj = simulate(&sc.plant, &x0, &env, &sc.observer, horizon).map_err(solver_err)?;
    ctx.write("trajectory.csv", &format::write_trajectory(&traj, &sc.requirement, &ctx.stamp()))?;
    Ok(Exit::Safe)
}

/// Overrides for `sweep`.
#[derive(Clone, Debug, Default)]
pub struct SweepArgs {
    pub resolution: Option<usize>,
    pub n_per_cell: Option<usize>,
}

/// Monte Carlo violation rate per environment cell, from the initial set.
pub fn sweep(ctx: &RunContext, args: &SweepArgs) -> Outcome {
    let rows = sweep_rows(ctx, args)?;
    ctx.write("sweep.csv", &format::write_sweep(&rows, &ctx.stamp()))?;
    Ok(Exit::Safe)
}

pub fn sweep_rows(ctx: &RunContext, args: &SweepArgs) -> Result<Vec<SweepRow>, Failure> {
    let sc = ctx.scenario()?;
    let cfg = &ctx.config.sweep;
    let n = args.n_per_cell.or(cfg.n_per_cell).unwrap_or(10);
    let res = args.resolution.or(cfg.resolution).unwrap_or(sc.grid.resolution()[0]);
    if n == 0 {
        return Err(config_err(anyhow!("n_per_cell must be at least 1")));
    }
    if res == 0 {
        return Err(config_err(anyhow!("sweep resolution must be at least 1")));
    }
    let grid = EnvGrid::uniform(sc.grid.bounds().clone(), res, sc.grid.nominal().to_vec()).map_err(config_err)?;
    let pool = ctx.pool()?;
    use darepc_core::darepc::Executor;
    let results = pool.map(grid.cell_count(), |c| {
        simulate_cells(
            &sc.plant,
            &sc.observer,
            &sc.requirement,
            &sc.initial_set,
            &grid,
            &[c],
            None,
            n,
            rng::derive(sc.seed, tag::SWEEP, c as u64),
        )
    });
    results
        .into_iter()
        .enumerate()
        .map(|(c, r)| {
            let s = r.map_err(solver_err)?;
            Ok(SweepRow { cell: c, bounds: grid.cell_bounds(c), runs: s.runs, violated: s.violated })
        })
        .collect()
}

/// Output directory from the flag, else the environment override, else `out`.
pub fn resolve_out(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("DAREPC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
