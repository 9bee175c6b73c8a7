use darepc_core::contract::{Calibration, FeatureMap, LinearModel, PerceptionContract};
use darepc_core::error::GeometryError;
use darepc_core::geometry::{HyperRect, Scalar};
use darepc_core::reach::{check_tube, reach_tube, step_reach, ReachOptions, ReachTube, VerdictKind};
use darepc_core::rng::{self, tag};
use darepc_core::system::{Observer, Plant, Requirement};
use darepc_core::systems::{
    AutoLand, AutoLandObserver, AutoLandObserverParams, AutoLandParams, DroneObserver, DroneObserverParams, DroneParams,
    DroneRace,
};

/// `y_j = x[dims[j]] +- radius_j` over `domain`.
fn exact_center(domain: HyperRect, dims: &[usize], radius: &[f64]) -> PerceptionContract {
    let n = domain.dim();
    let center = dims
        .iter()
        .map(|&d| {
            let mut coeffs = vec![0.0; n];
            coeffs[d] = 1.0;
            LinearModel { coeffs, intercept: 0.0 }
        })
        .collect();
    let radius = radius.iter().map(|&r| LinearModel::constant(n, r)).collect();
    PerceptionContract {
        feature_map: FeatureMap::Affine,
        domain,
        center,
        radius,
        calibration: Calibration {
            pr: 0.9,
            epsilon: 0.01,
            delta: 0.01,
            n_samples: 0,
            quantile: 0.9,
            empirical_conformance: 1.0,
            per_dim_coverage: vec![],
            clamp_count: 0,
        },
    }
}

/// Damped double integrator tracking the origin from a position estimate.
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

fn inside(tube: &ReachTube, states: &[Vec<f64>]) -> bool {
    states.iter().zip(&tube.steps).all(|(x, b)| b.contains_point(x).unwrap())
}

/// Runs `n` simulations from `x_box` whose observations are clamped into
/// the contract, and counts those leaving the tube.
fn escapes<P: Plant, O: Observer>(
    plant: &P,
    obs: &O,
    contract: &PerceptionContract,
    x_box: &HyperRect,
    env: &HyperRect,
    horizon: usize,
    n: usize,
) -> usize {
    let tube = reach_tube(x_box, contract, plant, horizon, &ReachOptions::default()).unwrap();
    let mut bad = 0;
    for i in 0..n {
        let mut r = rng::stream(1, tag::MONTE_CARLO, i as u64);
        let mut x = x_box.lerp(&rng::unit_vec(&mut r, x_box.dim()));
        let e = env.lerp(&rng::unit_vec(&mut r, env.dim()));
        let mut states = vec![x.clone()];
        for t in 0..horizon {
            let y = contract.clamp_observation(&x, &obs.observe(&x, &e));
            x = plant.step(&x, &y, t).unwrap();
            states.push(x.clone());
        }
        if !inside(&tube, &states) {
            bad += 1;
        }
    }
    bad
}

fn autoland() -> (AutoLand, AutoLandObserver, PerceptionContract, HyperRect) {
    let p = AutoLand::new(AutoLandParams::default()).unwrap();
    let o = AutoLandObserver::new(AutoLandObserverParams::default(), &p);
    let c = exact_center(p.approach_box(), &[0, 1, 2, 3, 4], &[1.0, 0.3, 0.3, 0.002, 0.001]);
    let x = HyperRect::from_bounds(&[
        (-3016.0, -3014.0),
        (4.0, 5.0),
        (119.0, 121.0),
        (-0.001, 0.001),
        (-0.0534, -0.0514),
        (9.99, 10.01),
    ])
    .unwrap();
    (p, o, c, x)
}

fn drone() -> (DroneRace, DroneObserver, PerceptionContract) {
    let p = DroneRace::new(DroneParams::default()).unwrap();
    let o = DroneObserver::new(DroneObserverParams::default(), &p);
    let h = p.steps_to_finish();
    let c = exact_center(p.training_box(h, &DroneRace::tube_radius()), &[0, 1, 2, 5], &[0.02, 0.02, 0.02, 0.01]);
    (p, o, c)
}

#[test]
fn clamped_simulations_stay_in_the_tube() {
    let (p, o, c, x) = autoland();
    assert_eq!(escapes(&p, &o, &c, &x, &AutoLand::env_box(), 600, 100), 0);

    let (p, o, c) = drone();
    let h = p.steps_to_finish();
    assert_eq!(escapes(&p, &o, &c, &DroneRace::initial_set(), &HyperRect::from_bounds(&[(0.0, 0.3), (-0.3, 0.0)]).unwrap(), h, 100), 0);

    let dom = HyperRect::from_bounds(&[(-10.0, 10.0), (-10.0, 10.0)]).unwrap();
    let c = exact_center(dom, &[0], &[0.05]);
    let noisy = |x: &[f64], e: &[f64]| vec![x[0] + 0.2 * (e[0] - 0.5) + 0.1 * (37.0 * x[1]).sin()];
    let x = HyperRect::from_bounds(&[(0.5, 1.0), (-0.2, 0.2)]).unwrap();
    assert_eq!(escapes(&Toy, &noisy, &c, &x, &HyperRect::from_bounds(&[(0.0, 1.0)]).unwrap(), 200, 100), 0);
}

#[test]
fn point_tube_follows_the_simulation() {
    let dom = HyperRect::from_bounds(&[(-10.0, 10.0), (-10.0, 10.0)]).unwrap();
    let c = exact_center(dom, &[0], &[0.0]);
    let x0 = [0.8, -0.1];
    let tube = reach_tube(&HyperRect::point(&x0).unwrap(), &c, &Toy, 50, &ReachOptions::default()).unwrap();
    let mut x = x0.to_vec();
    for t in 0..50 {
        x = Toy.step(&x, &x[..1], t).unwrap();
        for (b, v) in tube.steps[t + 1].intervals().iter().zip(&x) {
            assert!(b.contains(*v) && b.width() < 1e-9, "t {t}: {b:?} vs {v}");
        }
    }
    assert_eq!(tube.steps[0], HyperRect::point(&x0).unwrap());
}

#[test]
fn wider_contracts_give_wider_steps() {
    let (p, _, _, x) = autoland();
    let mut r = rng::stream(2, tag::MONTE_CARLO, 0);
    for k in 0..50 {
        let u = rng::unit_vec(&mut r, 6);
        let w = rng::unit_vec(&mut r, 6);
        let b: Vec<(f64, f64)> = x.intervals().iter().zip(u.iter().zip(&w)).map(|(iv, (a, s))| {
            let lo = iv.lo() + a * iv.width() * 0.5;
            (lo, lo + s * iv.width() * 0.5)
        }).collect();
        let bx = HyperRect::from_bounds(&b).unwrap();
        let narrow = exact_center(p.approach_box(), &[0, 1, 2, 3, 4], &[0.5, 0.1, 0.1, 0.001, 0.0005]);
        let wide = exact_center(p.approach_box(), &[0, 1, 2, 3, 4], &[1.0, 0.3, 0.3, 0.002, 0.001]);
        let a = step_reach(&bx, &narrow, &p, k).unwrap();
        let b = step_reach(&bx, &wide, &p, k).unwrap();
        assert!(b.contains_rect(&a).unwrap(), "box {k}");
    }
}

/// Enlarges every box by a relative slack, to compare tubes up to the
/// center re-anchoring of the affine form.
fn loosened(tube: &ReachTube, rel: f64) -> ReachTube {
    let steps = tube
        .steps
        .iter()
        .map(|b| HyperRect::new(b.intervals().iter().map(|i| i.inflate(rel * i.width() + 1e-12)).collect()).unwrap())
        .collect();
    ReachTube { steps, dt: tube.dt }
}

#[test]
fn sub_boxes_give_nested_tubes() {
    let (p, _, c, x) = autoland();
    let h = 400;
    let big = reach_tube(&x, &c, &p, h, &ReachOptions::default()).unwrap();
    let (a, b) = x.bisect(1).unwrap();
    for half in [a, b] {
        let (q, _) = half.bisect(0).unwrap();
        let small = reach_tube(&q, &c, &p, h, &ReachOptions::default()).unwrap();
        assert!(loosened(&big, 0.02).contains_tube(&small));
    }
}

#[test]
fn tubes_shrink_geometrically_with_the_inputs() {
    let (p, _, _, x) = autoland();
    let c0 = [1.0, 0.3, 0.3, 0.002, 0.001];
    let mut widths = Vec::new();
    for k in 0..7 {
        let s = 0.5f64.powi(k);
        let b = HyperRect::new(x.intervals().iter().map(|i| darepc_core::geometry::Interval::centered(i.mid(), i.rad() * s)).collect()).unwrap();
        let r: Vec<f64> = c0.iter().map(|v| v * s).collect();
        let c = exact_center(p.approach_box(), &[0, 1, 2, 3, 4], &r);
        widths.push(reach_tube(&b, &c, &p, 600, &ReachOptions::default()).unwrap().max_width());
    }
    for w in widths.windows(2) {
        assert!(w[1] <= 0.6 * w[0], "{widths:?}");
    }
}

#[test]
fn check_tube_examples() {
    let r = |lo, hi| HyperRect::from_bounds(&[(lo, hi)]).unwrap();
    let tube = |bs: Vec<HyperRect>| ReachTube { steps: bs, dt: 1.0 };
    let req = Requirement::new(vec![0], vec![r(-1.0, 2.0); 6]).unwrap();
    assert_eq!(check_tube(&tube(vec![r(0.0, 1.0); 6]), &req).kind, VerdictKind::Contained);

    let req = Requirement::new(vec![0], vec![r(0.0, 1.0); 6]).unwrap();
    let mut bs = vec![r(0.2, 0.8); 6];
    bs[5] = r(3.0, 4.0);
    let v = check_tube(&tube(bs.clone()), &req);
    assert_eq!((v.kind, v.first_violation_t), (VerdictKind::FullExit, Some(5)));
    bs[2] = r(0.5, 1.5);
    let v = check_tube(&tube(bs.clone()), &req);
    assert_eq!((v.kind, v.first_violation_t), (VerdictKind::FullExit, Some(5)));
    bs[5] = r(0.2, 0.8);
    let v = check_tube(&tube(bs), &req);
    assert_eq!((v.kind, v.first_violation_t), (VerdictKind::PartialExit, Some(2)));
}

#[test]
fn blowup_is_reported() {
    let (p, _, _, x) = autoland();
    let c = exact_center(p.approach_box(), &[0, 1, 2, 3, 4], &[1.0, 5.0, 5.0, 0.2, 0.1]);
    let req = p.requirement(&Default::default(), p.steps_to_touchdown()).unwrap();
    let opts = ReachOptions::default().with_requirement_cap(&req, 6, 10.0);
    assert!(matches!(
        reach_tube(&x, &c, &p, p.steps_to_touchdown(), &opts),
        Err(darepc_core::error::ReachError::Blowup { .. } | darepc_core::error::ReachError::Geometry(_))
    ));
}
