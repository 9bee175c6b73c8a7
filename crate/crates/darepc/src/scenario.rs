//! A config resolved into plant, observer, sets and loop parameters.

use anyhow::{bail, ensure, Context, Result};
use darepc_core::contract::{FeatureMap, LearnParams, SamplerSpec};
use darepc_core::darepc::{DarepcParams, Problem};
use darepc_core::env_grid::EnvGrid;
use darepc_core::geometry::HyperRect;
use darepc_core::reach::ReachOptions;
use darepc_core::system::{Plant, Requirement};
use darepc_core::systems::{
    AutoLand, AutoLandObserver, AutoLandObserverParams, AutoLandParams, ClosedLoopSystem, CorridorWidths, DroneObserver,
    DroneObserverParams, DroneParams, DroneRace, SyntheticObserver,
};

use crate::config::{overlay, BoxSpec, ExperimentConfig, PlantKind};

pub struct Scenario {
    pub kind: PlantKind,
    pub plant: ClosedLoopSystem,
    pub observer: SyntheticObserver,
    pub initial_set: HyperRect,
    pub grid: EnvGrid,
    pub requirement: Requirement,
    pub horizon: usize,
    /// State domain of learned contracts; simulations must start inside it.
    pub contract_domain: HyperRect,
    pub training: SamplerSpec,
    pub params: DarepcParams,
    pub n_sims: usize,
    pub n_outside: usize,
    pub seed: u64,
}

struct Defaults {
    learn: (f64, f64, f64),
    removal_threshold: f64,
    n_sims: usize,
    n_outside: usize,
    width_cap_factor: f64,
}

fn defaults(kind: PlantKind) -> Defaults {
    match kind {
        PlantKind::Autoland => Defaults {
            learn: (0.9, 0.01, 0.001),
            removal_threshold: 0.8,
            n_sims: 30,
            n_outside: 10,
            width_cap_factor: 10.0,
        },
        PlantKind::Dronerace => Defaults {
            learn: (0.7, 0.02, 0.01),
            removal_threshold: 0.55,
            n_sims: 20,
            n_outside: 20,
            width_cap_factor: 0.0,
        },
    }
}

fn rect(bounds: &[[f64; 2]], what: &str) -> Result<HyperRect> {
    let pairs: Vec<(f64, f64)> = bounds.iter().map(|b| (b[0], b[1])).collect();
    HyperRect::from_bounds(&pairs).with_context(|| format!("{what} bounds"))
}

fn pair(p: [f64; 2]) -> (f64, f64) {
    (p[0], p[1])
}

impl Scenario {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let d = defaults(cfg.plant);
        let (plant, observer, initial, env_box, nominal, domain, training_kind, native_horizon) = match cfg.plant {
            PlantKind::Autoland => {
                let params: AutoLandParams = overlay(&AutoLandParams::default(), cfg.plant_params.as_ref(), "plant_params")?;
                let p = AutoLand::new(params)?;
                let op: AutoLandObserverParams =
                    overlay(&AutoLandObserverParams::default(), cfg.observer.as_ref(), "observer")?;
                let o = AutoLandObserver::new(op, &p);
                let initial = match &cfg.initial_set {
                    None => AutoLand::x01(),
                    Some(BoxSpec::Preset(s)) if s == "x01" => AutoLand::x01(),
                    Some(BoxSpec::Preset(s)) if s == "x02" => AutoLand::x02(),
                    Some(BoxSpec::Preset(s)) => bail!("unknown autoland initial set {s:?}; use x01, x02 or bounds"),
                    Some(BoxSpec::Bounds(b)) => rect(b, "initial_set")?,
                };
                let domain = p.approach_box();
                let h = p.steps_to_touchdown();
                (
                    ClosedLoopSystem::AutoLand(p),
                    SyntheticObserver::AutoLand(o),
                    initial,
                    AutoLand::env_box(),
                    AutoLand::nominal_env(),
                    domain,
                    None,
                    h,
                )
            }
            PlantKind::Dronerace => {
                let params: DroneParams = overlay(&DroneParams::default(), cfg.plant_params.as_ref(), "plant_params")?;
                let p = DroneRace::new(params)?;
                let op: DroneObserverParams = overlay(&DroneObserverParams::default(), cfg.observer.as_ref(), "observer")?;
                let o = DroneObserver::new(op, &p);
                let initial = match &cfg.initial_set {
                    None => DroneRace::initial_set(),
                    Some(BoxSpec::Preset(s)) if s == "x0" => DroneRace::initial_set(),
                    Some(BoxSpec::Preset(s)) => bail!("unknown dronerace initial set {s:?}; use x0 or bounds"),
                    Some(BoxSpec::Bounds(b)) => rect(b, "initial_set")?,
                };
                let h = p.steps_to_finish();
                let radius = cfg.training.tube_radius.clone().unwrap_or_else(DroneRace::tube_radius);
                ensure!(radius.len() == 12, "training.tube_radius needs 12 entries, got {}", radius.len());
                ensure!(radius.iter().all(|r| *r >= 0.0 && r.is_finite()), "training.tube_radius must be non-negative");
                let domain = p.training_box(h, &radius);
                let refs = p.reference_states(h);
                (
                    ClosedLoopSystem::DroneRace(p),
                    SyntheticObserver::DroneRace(o),
                    initial,
                    DroneRace::env_box(),
                    DroneRace::nominal_env(),
                    domain,
                    Some((refs, radius)),
                    h,
                )
            }
        };

        ensure!(initial.dim() == plant.state_dim(), "initial_set has {} dims, plant has {}", initial.dim(), plant.state_dim());
        ensure!(
            domain.contains_rect(&initial)?,
            "initial_set lies outside the plant's state domain {:?}",
            domain.intervals().iter().map(|i| (i.lo(), i.hi())).collect::<Vec<_>>()
        );

        let env_box = match &cfg.env.bounds {
            Some(b) => rect(b, "env")?,
            None => env_box,
        };
        ensure!(env_box.dim() == 2, "env.bounds needs 2 dimensions");
        let nominal = cfg.env.nominal.clone().unwrap_or(nominal);
        let resolution = cfg.env.resolution.unwrap_or(16);
        ensure!(resolution >= 1, "env.resolution must be at least 1");
        let grid = EnvGrid::uniform(env_box, resolution, nominal).context("env grid")?;

        let horizon = cfg.requirement.horizon.unwrap_or(native_horizon);
        ensure!(horizon >= 1, "requirement.horizon must be at least 1");
        let requirement = match &plant {
            ClosedLoopSystem::AutoLand(p) => {
                ensure!(cfg.requirement.half_width.is_none(), "requirement.half_width applies to dronerace only");
                let w0 = CorridorWidths::default();
                let widths = CorridorWidths {
                    x: cfg.requirement.x.map(pair).or(w0.x),
                    y: cfg.requirement.y.map(pair).unwrap_or(w0.y),
                    z: cfg.requirement.z.map(pair).unwrap_or(w0.z),
                };
                p.requirement(&widths, horizon)?
            }
            ClosedLoopSystem::DroneRace(p) => {
                let r = &cfg.requirement;
                ensure!(r.x.is_none() && r.y.is_none() && r.z.is_none(), "requirement.x/y/z apply to autoland only");
                p.requirement(r.half_width.unwrap_or(0.3), horizon)?
            }
        };

        let c = &cfg.contract;
        let mut learn = LearnParams::new(c.pr.unwrap_or(d.learn.0), c.epsilon.unwrap_or(d.learn.1), c.delta.unwrap_or(d.learn.2));
        if let Some(f) = &c.feature_map {
            learn.feature_map =
                FeatureMap::from_id(f).with_context(|| format!("contract.feature_map {f:?}; use constant, affine or quadratic"))?;
        }
        learn.validate().context("contract parameters")?;

        let training = match training_kind {
            None => SamplerSpec::uniform(domain.clone(), cfg.seed),
            Some((refs, radius)) => SamplerSpec::reference_tube(domain.clone(), refs, radius, cfg.seed),
        };

        let dp = &cfg.darepc;
        let mut params = DarepcParams::new(horizon);
        params.learn = learn;
        params.removal_threshold = dp.removal_threshold.unwrap_or(d.removal_threshold);
        ensure!((0.0..=1.0).contains(&params.removal_threshold), "darepc.removal_threshold must lie in [0, 1]");
        if let Some(v) = dp.max_state_depth {
            params.max_state_depth = v;
        }
        if let Some(v) = dp.max_env_shrinks {
            params.max_env_shrinks = v;
        }
        if let Some(v) = dp.probe_budget {
            ensure!(v >= 1, "darepc.probe_budget must be at least 1");
            params.probe_budget = v;
        }
        params.seed = cfg.seed;
        let mut reach = ReachOptions::default();
        if let Some(g) = dp.generator_factor {
            ensure!(g >= 1, "darepc.generator_factor must be at least 1");
            reach.generator_factor = g;
        }
        let cap = dp.width_cap_factor.unwrap_or(d.width_cap_factor);
        ensure!(cap >= 0.0 && cap.is_finite(), "darepc.width_cap_factor must be non-negative");
        if cap > 0.0 {
            reach = reach.with_requirement_cap(&requirement, plant.state_dim(), cap);
        }
        params.reach = reach;

        Ok(Self {
            kind: cfg.plant,
            plant,
            observer,
            initial_set: initial,
            grid,
            requirement,
            horizon,
            contract_domain: domain,
            training,
            params,
            n_sims: cfg.validate.n_sims.unwrap_or(d.n_sims),
            n_outside: cfg.validate.n_outside.unwrap_or(d.n_outside),
            seed: cfg.seed,
        })
    }

    pub fn problem(&self) -> Problem<'_, ClosedLoopSystem, SyntheticObserver> {
        Problem {
            plant: &self.plant,
            observer: &self.observer,
            initial_set: self.initial_set.clone(),
            requirement: &self.requirement,
            contract_domain: self.contract_domain.clone(),
            training: self.training.clone(),
        }
    }
}
