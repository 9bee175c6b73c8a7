//! The refinement loop: verify initial-state boxes against a requirement
//! under a learned contract, split boxes whose tube leaves the requirement,
//! and shrink the environment set toward the nominal environment.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::contract::{learn_contract, EnvDomain, LearnParams, PerceptionContract, SamplerSpec};
use crate::env_grid::EnvGrid;
use crate::error::{ReachError, RefineError};
use crate::geometry::HyperRect;
use crate::reach::{check_tube, reach_prefix, ReachOptions, ReachTube, TubeVerdict, VerdictKind};
use crate::rng::{self, tag};
use crate::system::{simulate, Observer, Plant, Requirement};

/// Relative widths below this are treated as already split to nothing.
const DEGENERATE_WIDTH: f64 = 1e-12;

/// Bisects `x_c` along the axis that is widest relative to `x_0`, lowest
/// index first on ties.
pub fn refine_state(x_c: &HyperRect, x_0: &HyperRect) -> Result<(HyperRect, HyperRect), RefineError> {
    let axis = split_axis(x_c, x_0)?;
    Ok(x_c.bisect(axis)?)
}

fn split_axis(x_c: &HyperRect, x_0: &HyperRect) -> Result<usize, RefineError> {
    if x_c.dim() != x_0.dim() {
        return Err(crate::error::GeometryError::DimensionMismatch { expected: x_0.dim(), found: x_c.dim() }.into());
    }
    let mut best = (0, 0.0);
    for (i, (w, w0)) in x_c.widths().into_iter().zip(x_0.widths()).enumerate() {
        let rel = if w0 > 0.0 { w / w0 } else { 0.0 };
        if rel > best.1 {
            best = (i, rel);
        }
    }
    if best.1 < DEGENERATE_WIDTH {
        return Err(RefineError::DegenerateBox);
    }
    Ok(best.0)
}

/// Which cells a shrink removed and why.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShrinkReport {
    pub removed: Vec<usize>,
    /// False when no cell fell below the threshold and the farthest cell
    /// was dropped instead.
    pub by_threshold: bool,
}

/// Probe settings for [`shrink_env`].
#[derive(Clone, Debug)]
pub struct ProbeSpec<'a> {
    /// State distribution of the probes.
    pub states: &'a SamplerSpec,
    pub budget: usize,
    pub threshold: f64,
    pub seed: u64,
}

/// Measures per-cell conformance of `observer` to `contract` and removes
/// the cells below the threshold, or the active cell farthest from the
/// nominal environment when none is below. The nominal cell stays.
pub fn shrink_env<O: Observer + ?Sized>(
    grid: &EnvGrid,
    contract: &PerceptionContract,
    observer: &O,
    probes: &ProbeSpec<'_>,
) -> Result<(EnvGrid, ShrinkReport), RefineError> {
    let mut out = grid.clone();
    measure_conformance(&mut out, contract, observer, probes)?;
    let nominal = out.nominal_cell();
    let active = out.active_cells();
    let below: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&c| c != nominal && out.cell(c).conformance.is_some_and(|p| p < probes.threshold))
        .collect();
    let (removed, by_threshold) = if !below.is_empty() {
        (below, true)
    } else {
        let mut far: Option<(usize, f64)> = None;
        for &c in active.iter().filter(|&&c| c != nominal) {
            let d = out.normalized_distance_to_nominal(c);
            if far.map_or(true, |(_, best)| d > best) {
                far = Some((c, d));
            }
        }
        (far.map(|(c, _)| vec![c]).unwrap_or_default(), false)
    };
    for &c in &removed {
        out.remove(c)?;
    }
    Ok((out, ShrinkReport { removed, by_threshold }))
}

/// Fills `conformance` and `samples_seen` for every active cell.
pub fn measure_conformance<O: Observer + ?Sized>(
    grid: &mut EnvGrid,
    contract: &PerceptionContract,
    observer: &O,
    probes: &ProbeSpec<'_>,
) -> Result<(), RefineError> {
    if probes.budget == 0 {
        return Err(RefineError::InvalidParam("probe budget must be positive".into()));
    }
    for c in grid.active_cells() {
        let bounds = grid.cell_bounds(c);
        let mut hits = 0usize;
        for k in 0..probes.budget {
            let mut r = rng::stream(probes.seed, tag::SHRINK_PROBE, (c * probes.budget + k) as u64);
            let x = probes.states.draw_state(&mut r).map_err(|e| RefineError::InvalidParam(format!("{e}")))?;
            let e = bounds.lerp(&rng::unit_vec(&mut r, bounds.dim()));
            if contract.contains(&x, &observer.observe(&x, &e)) {
                hits += 1;
            }
        }
        let cell = grid.cell_mut(c);
        cell.conformance = Some(hits as f64 / probes.budget as f64);
        cell.samples_seen += probes.budget;
    }
    Ok(())
}

/// Runs independent jobs and returns their results in index order.
pub trait Executor {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T>;
}

/// Runs jobs one after another.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DarepcParams {
    pub learn: LearnParams,
    pub removal_threshold: f64,
    pub max_state_depth: usize,
    pub max_env_shrinks: usize,
    pub horizon: usize,
    /// Probes per cell when measuring conformance.
    pub probe_budget: usize,
    pub seed: u64,
    pub reach: ReachOptions,
}

impl DarepcParams {
    pub fn new(horizon: usize) -> Self {
        Self {
            learn: LearnParams::new(0.9, 0.01, 0.001),
            removal_threshold: 0.8,
            max_state_depth: 12,
            max_env_shrinks: 23,
            horizon,
            probe_budget: 200,
            seed: 0,
            reach: ReachOptions::default(),
        }
    }
}

/// Everything the loop verifies against.
pub struct Problem<'a, P, O: ?Sized> {
    pub plant: &'a P,
    pub observer: &'a O,
    pub initial_set: HyperRect,
    pub requirement: &'a Requirement,
    /// Domain of the learned contracts.
    pub contract_domain: HyperRect,
    /// State distribution for learning and probing; its seed is replaced
    /// per round.
    pub training: SamplerSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeKind {
    Safe,
    Counterexample,
    Inconclusive,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DarepcStats {
    pub refinements_state: usize,
    pub refinements_env: usize,
    pub tubes_computed: usize,
    pub contracts_learned: usize,
    pub max_depth: usize,
    /// Filled in by callers that have a clock.
    pub wall_time: f64,
}

/// One logged decision, in the order it was taken.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Event {
    Learned { version: usize, active_cells: usize, conformance: f64 },
    Verified { item: usize, depth: usize, version: usize, verdict: VerdictKind, first_violation_t: Option<usize>, note: Option<String> },
    Refined { item: usize, axis: usize, children: [usize; 2] },
    Shrunk { removed: Vec<usize>, by_threshold: bool },
    Recheck { item: usize, version: usize },
    Stopped { reason: String },
}

/// A box proven Contained, with the contract version that proved it.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub item: usize,
    pub depth: usize,
    pub state_box: HyperRect,
    pub version: usize,
    pub tube: ReachTube,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DarepcOutcome {
    pub kind: OutcomeKind,
    pub contract: Option<PerceptionContract>,
    pub env: EnvGrid,
    pub witness_state_box: Option<HyperRect>,
    /// Tube of the witness box under the contract that refuted it.
    pub witness_tube: Option<ReachTube>,
    /// For a safe outcome, boxes covering the initial set, all certified by
    /// the final contract.
    pub cover: Vec<Certificate>,
    pub stats: DarepcStats,
    pub log: Vec<Event>,
    pub diagnostic: Option<String>,
}

struct Item {
    id: usize,
    depth: usize,
    state_box: HyperRect,
}

/// Runs the refinement loop.
pub fn darepc<P: Plant, O: Observer + ?Sized, E: Executor>(
    problem: &Problem<'_, P, O>,
    grid0: &EnvGrid,
    params: &DarepcParams,
    exec: &E,
) -> DarepcOutcome {
    let mut run = Run {
        problem,
        params,
        grid: grid0.clone(),
        contract: None,
        version: 0,
        stats: DarepcStats::default(),
        log: Vec::new(),
    };
    match run.main(exec) {
        Ok(outcome) => outcome,
        Err(msg) => {
            run.log.push(Event::Stopped { reason: msg.clone() });
            run.finish(OutcomeKind::Inconclusive, None, Vec::new(), Some(msg))
        }
    }
}

struct Run<'p, 'a, P, O: ?Sized> {
    problem: &'p Problem<'a, P, O>,
    params: &'p DarepcParams,
    grid: EnvGrid,
    contract: Option<PerceptionContract>,
    version: usize,
    stats: DarepcStats,
    log: Vec<Event>,
}

impl<P: Plant, O: Observer + ?Sized> Run<'_, '_, P, O> {
    fn main<E: Executor>(&mut self, exec: &E) -> Result<DarepcOutcome, String> {
        let x0 = &self.problem.initial_set;
        if !self.grid.is_active(self.grid.nominal_cell()) {
            return Err("the nominal environment cell is not active".into());
        }
        self.learn()?;
        let mut next_id = 1;
        let mut queue: VecDeque<Item> = VecDeque::from([Item { id: 0, depth: 0, state_box: x0.clone() }]);
        let mut done: Vec<Certificate> = Vec::new();
        loop {
            if queue.is_empty() {
                let stale: Vec<usize> = (0..done.len()).filter(|&i| done[i].version != self.version).collect();
                if stale.is_empty() {
                    done.sort_by_key(|c| c.item);
                    let contract = self.contract.clone();
                    return Ok(self.finish(OutcomeKind::Safe, contract, done, None));
                }
                // Previously certified boxes must hold under the final contract.
                let mut keep = Vec::with_capacity(done.len());
                for (i, cert) in done.drain(..).enumerate() {
                    if stale.binary_search(&i).is_ok() {
                        self.log.push(Event::Recheck { item: cert.item, version: self.version });
                        queue.push_back(Item { id: cert.item, depth: cert.depth, state_box: cert.state_box });
                    } else {
                        keep.push(cert);
                    }
                }
                done = keep;
            }

            // One generation: everything queued is checked under the current
            // contract, then the environment shrinks at most once.
            let batch: Vec<Item> = queue.drain(..).collect();
            let contract = self.contract.as_ref().expect("learned before the loop");
            let verdicts = exec.map(batch.len(), |i| self.verify(&batch[i].state_box, contract));
            self.stats.tubes_computed += batch.len();
            let mut partial = false;
            for (item, (verdict, note, tube)) in batch.into_iter().zip(verdicts) {
                self.stats.max_depth = self.stats.max_depth.max(item.depth);
                self.log.push(Event::Verified {
                    item: item.id,
                    depth: item.depth,
                    version: self.version,
                    verdict: verdict.kind,
                    first_violation_t: verdict.first_violation_t,
                    note,
                });
                match verdict.kind {
                    VerdictKind::Contained => {
                        let tube = tube.expect("a contained verdict comes from a tube");
                        done.push(Certificate { item: item.id, depth: item.depth, state_box: item.state_box, version: self.version, tube })
                    }
                    VerdictKind::FullExit => {
                        let mut out = self.finish(OutcomeKind::Counterexample, None, Vec::new(), None);
                        out.witness_state_box = Some(item.state_box);
                        out.witness_tube = tube;
                        return Ok(out);
                    }
                    VerdictKind::PartialExit => {
                        if item.depth >= self.params.max_state_depth {
                            return Err(format!("state depth budget {} exhausted at item {}", self.params.max_state_depth, item.id));
                        }
                        let axis = split_axis(&item.state_box, x0).map_err(|e| format!("{e}"))?;
                        let (a, b) = item.state_box.bisect(axis).map_err(|e| format!("{e}"))?;
                        self.log.push(Event::Refined { item: item.id, axis, children: [next_id, next_id + 1] });
                        queue.push_back(Item { id: next_id, depth: item.depth + 1, state_box: a });
                        queue.push_back(Item { id: next_id + 1, depth: item.depth + 1, state_box: b });
                        next_id += 2;
                        self.stats.refinements_state += 1;
                        partial = true;
                    }
                }
            }
            if partial && self.grid.active_count() > 1 {
                if self.stats.refinements_env >= self.params.max_env_shrinks {
                    return Err(format!("environment shrink budget {} exhausted", self.params.max_env_shrinks));
                }
                self.shrink()?;
                self.learn()?;
            }
        }
    }

    fn verify(&self, x: &HyperRect, contract: &PerceptionContract) -> (TubeVerdict, Option<String>, Option<ReachTube>) {
        let horizon = self.params.horizon;
        let (tube, stopped) = match reach_prefix(x, contract, self.problem.plant, horizon, &self.params.reach) {
            Ok(r) => r,
            Err(e) => return (TubeVerdict { kind: VerdictKind::PartialExit, first_violation_t: None }, Some(format!("{e}")), None),
        };
        let v = check_tube(&tube, self.problem.requirement);
        match stopped {
            None => {
                let keep = v.kind != VerdictKind::PartialExit;
                (v, None, keep.then_some(tube))
            }
            // The steps before a blowup still refute; otherwise the tube is
            // vacuous or undefined and decides nothing, so refine.
            Some(e) if v.kind == VerdictKind::FullExit => (v, Some(format!("{e}")), Some(tube)),
            Some(e) => {
                let t = match e {
                    ReachError::Blowup { step, .. } => Some(step),
                    _ => v.first_violation_t,
                };
                (TubeVerdict { kind: VerdictKind::PartialExit, first_violation_t: t }, Some(format!("{e}")), None)
            }
        }
    }

    fn round_seed(&self, tag: u64, round: usize) -> u64 {
        rng::derive(self.params.seed, tag, round as u64)
    }

    fn learn(&mut self) -> Result<(), String> {
        let round = self.stats.contracts_learned;
        let mut sampler = self.problem.training.clone();
        sampler.seed = self.round_seed(tag::CONTRACT_SAMPLE, round);
        let c = learn_contract(
            &self.problem.contract_domain,
            EnvDomain::Grid(&self.grid),
            self.problem.observer,
            &self.params.learn,
            &sampler,
        )
        .map_err(|e| format!("contract learning failed: {e}"))?;
        self.stats.contracts_learned += 1;
        self.version = round;
        self.log.push(Event::Learned {
            version: round,
            active_cells: self.grid.active_count(),
            conformance: c.calibration.empirical_conformance,
        });
        self.contract = Some(c);
        Ok(())
    }

    fn shrink(&mut self) -> Result<(), String> {
        let contract = self.contract.as_ref().expect("learned before shrinking");
        let probes = ProbeSpec {
            states: &self.problem.training,
            budget: self.params.probe_budget,
            threshold: self.params.removal_threshold,
            seed: self.round_seed(tag::SHRINK_PROBE, self.stats.refinements_env),
        };
        let (grid, report) =
            shrink_env(&self.grid, contract, self.problem.observer, &probes).map_err(|e| format!("{e}"))?;
        debug_assert!(grid.is_active(grid.nominal_cell()));
        self.grid = grid;
        self.stats.refinements_env += 1;
        self.log.push(Event::Shrunk { removed: report.removed, by_threshold: report.by_threshold });
        Ok(())
    }

    fn finish(
        &mut self,
        kind: OutcomeKind,
        contract: Option<PerceptionContract>,
        cover: Vec<Certificate>,
        diagnostic: Option<String>,
    ) -> DarepcOutcome {
        DarepcOutcome {
            kind,
            contract,
            env: self.grid.clone(),
            witness_state_box: None,
            witness_tube: None,
            cover,
            stats: self.stats.clone(),
            log: core::mem::take(&mut self.log),
            diagnostic,
        }
    }
}

/// Simulation tally from a box of initial states and a set of cells.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSummary {
    pub runs: usize,
    pub satisfied: usize,
    pub violated: usize,
    /// Per-step observations, and how many fell inside the contract.
    pub observations: usize,
    pub conforming: usize,
}

impl SimSummary {
    pub fn satisfied_fraction(&self) -> f64 {
        if self.runs == 0 { 0.0 } else { self.satisfied as f64 / self.runs as f64 }
    }

    pub fn violated_fraction(&self) -> f64 {
        if self.runs == 0 { 0.0 } else { self.violated as f64 / self.runs as f64 }
    }

    pub fn conformance(&self) -> Option<f64> {
        (self.observations > 0).then(|| self.conforming as f64 / self.observations as f64)
    }
}

/// Runs `n` executions from uniform `(x, e)` over `x_box` and the listed
/// cells. Run `i` depends only on `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cells<P: Plant, O: Observer + ?Sized>(
    plant: &P,
    observer: &O,
    requirement: &Requirement,
    x_box: &HyperRect,
    grid: &EnvGrid,
    cells: &[usize],
    contract: Option<&PerceptionContract>,
    n: usize,
    seed: u64,
) -> Result<SimSummary, RefineError> {
    let mut s = SimSummary::default();
    if cells.is_empty() {
        return Ok(s);
    }
    let horizon = requirement.horizon();
    for i in 0..n {
        let mut r = rng::stream(seed, tag::VALIDATE, i as u64);
        let x0 = x_box.lerp(&rng::unit_vec(&mut r, x_box.dim()));
        let e = grid.sample_in(cells, &mut r).expect("non-empty cell list");
        let traj = simulate(plant, &x0, &e, observer, horizon)?;
        s.runs += 1;
        if requirement.first_violation(&traj.states).is_none() {
            s.satisfied += 1;
        } else {
            s.violated += 1;
        }
        if let Some(c) = contract {
            for (x, y) in traj.states.iter().zip(&traj.observations) {
                s.observations += 1;
                if c.contains(x, y) {
                    s.conforming += 1;
                }
            }
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub kind: OutcomeKind,
    pub sims: SimSummary,
}

/// Checks an outcome by simulation: a safe outcome from the initial set
/// under the active cells, a counterexample from its witness box under the
/// retained cells.
pub fn validate_outcome<P: Plant, O: Observer + ?Sized>(
    outcome: &DarepcOutcome,
    problem: &Problem<'_, P, O>,
    n_sims: usize,
    seed: u64,
) -> Result<ValidationReport, RefineError> {
    let cells = outcome.env.active_cells();
    let (x_box, contract) = match outcome.kind {
        OutcomeKind::Safe => (&problem.initial_set, outcome.contract.as_ref()),
        OutcomeKind::Counterexample => (
            outcome
                .witness_state_box
                .as_ref()
                .ok_or_else(|| RefineError::InvalidParam("counterexample without a witness box".into()))?,
            None,
        ),
        OutcomeKind::Inconclusive => {
            return Err(RefineError::InvalidParam("an inconclusive outcome has nothing to validate".into()))
        }
    };
    let sims =
        simulate_cells(problem.plant, problem.observer, problem.requirement, x_box, &outcome.env, &cells, contract, n_sims, seed)?;
    Ok(ValidationReport { kind: outcome.kind, sims })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(b: &[(f64, f64)]) -> HyperRect {
        HyperRect::from_bounds(b).unwrap()
    }

    #[test]
    fn refine_state_examples() {
        let unit = rect(&[(0.0, 1.0), (0.0, 1.0)]);
        let (a, _) = refine_state(&unit, &unit).unwrap();
        assert_eq!(a, rect(&[(0.0, 0.5), (0.0, 1.0)]));
        let thin = rect(&[(0.0, 0.1), (0.0, 0.9)]);
        let (a, b) = refine_state(&thin, &unit).unwrap();
        assert_eq!(a.axis(1).hi(), 0.45);
        assert_eq!(b.axis(1).lo(), 0.45);
        let point = rect(&[(0.5, 0.5), (0.5, 0.5)]);
        assert_eq!(refine_state(&point, &unit), Err(RefineError::DegenerateBox));
    }
}
