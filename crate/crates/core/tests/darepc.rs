use darepc_core::contract::{learn_contract, EnvDomain, LearnParams, SamplerSpec};
use darepc_core::darepc::{
    darepc, refine_state, shrink_env, validate_outcome, DarepcParams, Event, OutcomeKind, ProbeSpec, Problem, Sequential,
};
use darepc_core::env_grid::EnvGrid;
use darepc_core::error::GeometryError;
use darepc_core::geometry::{HyperRect, Scalar};
use darepc_core::system::{ExactObserver, Plant, Requirement};
use darepc_core::systems::{hash_quantized, unit_noise};

fn rect(b: &[(f64, f64)]) -> HyperRect {
    HyperRect::from_bounds(b).unwrap()
}

/// Damped double integrator driven toward the origin by a position estimate.
struct Toy;

impl Plant for Toy {
    fn name(&self) -> &str {
        "toy"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn observed_dims(&self) -> &[usize] {
        &[0]
    }
    fn dt(&self) -> f64 {
        0.1
    }
    fn reference(&self, _t: usize) -> Vec<f64> {
        vec![0.0, 0.0]
    }
    fn step<S: Scalar>(&self, s: &[S], y: &[S], _t: usize) -> Result<Vec<S>, GeometryError> {
        let u = y[0].scale(-2.0) + s[1].scale(-1.5);
        Ok(vec![s[0].clone() + s[1].scale(0.1), s[1].clone() + (u + s[0].sin().scale(0.3)).scale(0.1)])
    }
}

/// Position error that grows sharply in the top row and column of the
/// unit environment square.
fn degrading(x: &[f64], e: &[f64]) -> Vec<f64> {
    let a = 0.02 + 3.0 * (e[0] - 0.67).max(0.0) + 3.0 * (e[1] - 0.67).max(0.0);
    let w = unit_noise(hash_quantized(7, &[x[0], x[1], e[0], e[1]], &[1e-6; 4]));
    vec![x[0] + a * w]
}

fn grid() -> EnvGrid {
    EnvGrid::uniform(rect(&[(0.0, 1.0), (0.0, 1.0)]), 3, vec![0.0, 0.0]).unwrap()
}

fn x0() -> HyperRect {
    rect(&[(0.5, 1.0), (-0.2, 0.2)])
}

fn domain() -> HyperRect {
    rect(&[(-3.0, 3.0), (-3.0, 3.0)])
}

fn corridor(lo: f64, hi: f64, horizon: usize) -> Requirement {
    Requirement::new(vec![0], vec![rect(&[(lo, hi)]); horizon + 1]).unwrap()
}

fn params(horizon: usize) -> DarepcParams {
    let mut p = DarepcParams::new(horizon);
    p.learn = LearnParams::new(0.9, 0.05, 0.01);
    p.max_env_shrinks = 8;
    p.max_state_depth = 8;
    p
}

fn problem<'a, O: darepc_core::system::Observer + ?Sized>(obs: &'a O, req: &'a Requirement) -> Problem<'a, Toy, O> {
    Problem {
        plant: &Toy,
        observer: obs,
        initial_set: x0(),
        requirement: req,
        contract_domain: domain(),
        training: SamplerSpec::uniform(domain(), 0),
    }
}

#[test]
fn refinement_leaves_partition_the_box() {
    let b = rect(&[(0.0, 2.0), (-1.0, 1.0), (0.0, 0.5)]);
    let mut leaves = vec![b.clone()];
    for _ in 0..b.dim() * 2 {
        leaves = leaves.iter().flat_map(|l| {
            let (a, c) = refine_state(l, &b).unwrap();
            [a, c]
        }).collect();
    }
    assert_eq!(leaves.len(), 1 << (b.dim() * 2));
    let v: f64 = leaves.iter().map(HyperRect::volume).sum();
    assert!((v - b.volume()).abs() < 1e-12 * b.volume());
    // Balanced splits: every leaf is the box scaled by a quarter per axis.
    for l in &leaves {
        for (w, w0) in l.widths().iter().zip(b.widths()) {
            assert!((w - w0 / 4.0).abs() < 1e-12);
        }
    }
}

fn probes(spec: &SamplerSpec, threshold: f64) -> ProbeSpec<'_> {
    ProbeSpec { states: spec, budget: 200, threshold, seed: 5 }
}

#[test]
fn shrink_examples() {
    let spec = SamplerSpec::uniform(rect(&[(-1.0, 1.0), (-1.0, 1.0)]), 1);
    let exact = ExactObserver { observed_dims: vec![0] };
    let env = rect(&[(0.0, 1.0), (0.0, 1.0)]);
    let c = learn_contract(&domain(), EnvDomain::Box(&env), &degrading, &LearnParams::new(0.9, 0.05, 0.01), &SamplerSpec::uniform(rect(&[(-1.0, 1.0), (-1.0, 1.0)]), 2)).unwrap();

    // A lone nominal cell is never removed.
    let single = EnvGrid::uniform(env.clone(), 1, vec![0.0, 0.0]).unwrap();
    let (g, r) = shrink_env(&single, &c, &degrading, &probes(&spec, 0.99)).unwrap();
    assert_eq!(g.active_count(), 1);
    assert!(r.removed.is_empty());

    // Cells below the threshold go; cells above stay.
    let (g, r) = shrink_env(&grid(), &c, &degrading, &probes(&spec, 0.8)).unwrap();
    assert!(r.by_threshold);
    assert!(r.removed.contains(&8), "{r:?}");
    for cell in [0, 1, 3, 4] {
        assert!(g.is_active(cell), "cell {cell} removed: {r:?}");
    }

    // With nothing below threshold the farthest corner goes.
    let (g, r) = shrink_env(&grid(), &c, &exact, &probes(&spec, 0.8)).unwrap();
    assert_eq!((r.removed.clone(), r.by_threshold), (vec![8], false));
    assert_eq!(g.active_count(), 8);
    assert!(g.is_active(g.nominal_cell()));
}

#[test]
fn exact_perception_is_safe_without_refinement() {
    let h = 60;
    let req = corridor(-1.3, 1.3, h);
    let exact = ExactObserver { observed_dims: vec![0] };
    let out = darepc(&problem(&exact, &req), &grid(), &params(h), &Sequential);
    assert_eq!(out.kind, OutcomeKind::Safe, "{:?}", out.diagnostic);
    assert_eq!((out.stats.refinements_state, out.stats.refinements_env), (0, 0));
    assert_eq!(out.cover.len(), 1);
    assert_eq!(out.env.active_count(), 9);
}

#[test]
fn requirement_disjoint_from_the_start_is_a_counterexample() {
    let h = 30;
    let req = corridor(5.0, 6.0, h);
    let out = darepc(&problem(&degrading, &req), &grid(), &params(h), &Sequential);
    assert_eq!(out.kind, OutcomeKind::Counterexample);
    assert_eq!(out.witness_state_box.as_ref(), Some(&x0()));
    assert!(out.witness_tube.is_some());
    let v = validate_outcome(&out, &problem(&degrading, &req), 20, 3).unwrap();
    assert_eq!(v.sims.violated, 20);
}

#[test]
fn degraded_cells_are_shed_until_safe() {
    let h = 60;
    let req = corridor(-1.3, 1.3, h);
    let g0 = grid();
    let out = darepc(&problem(&degrading, &req), &g0, &params(h), &Sequential);
    assert_eq!(out.kind, OutcomeKind::Safe, "{:?}", out.diagnostic);
    assert!(out.stats.refinements_env >= 1);
    assert!(out.env.is_active(out.env.nominal_cell()));
    assert!(!out.env.is_active(8));

    // Removed cells never come back, and the active set only shrinks.
    let mut removed = Vec::new();
    for ev in &out.log {
        if let Event::Shrunk { removed: r, .. } = ev {
            for c in r {
                assert!(!removed.contains(c));
                removed.push(*c);
            }
        }
    }
    removed.sort();
    assert_eq!(removed, out.env.removed_cells());
    assert!(out.env.active_cells().iter().all(|c| g0.is_active(*c)));

    // The certified boxes tile the initial set.
    let v: f64 = out.cover.iter().map(|c| c.state_box.volume()).sum();
    assert!((v - x0().volume()).abs() < 1e-12);
    for c in &out.cover {
        assert!(x0().contains_rect(&c.state_box).unwrap());
        assert_eq!(c.tube.steps.len(), h + 1);
    }
    for (i, a) in out.cover.iter().enumerate() {
        for b in &out.cover[i + 1..] {
            let overlap: f64 = a.state_box.intervals().iter().zip(b.state_box.intervals()).map(|(p, q)| (p.hi().min(q.hi()) - p.lo().max(q.lo())).max(0.0)).product();
            assert!(overlap < 1e-15);
        }
    }

    let v = validate_outcome(&out, &problem(&degrading, &req), 30, 4).unwrap();
    assert_eq!(v.sims.satisfied, 30);
}

#[test]
fn runs_are_reproducible() {
    let h = 60;
    let req = corridor(-1.3, 1.3, h);
    let a = darepc(&problem(&degrading, &req), &grid(), &params(h), &Sequential);
    let b = darepc(&problem(&degrading, &req), &grid(), &params(h), &Sequential);
    assert_eq!(a, b);
}
