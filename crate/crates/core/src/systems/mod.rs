//! The two case-study plants with their references, requirements,
//! environment spaces and synthetic observers.

pub mod autoland;
pub mod drone;
mod noise;

use alloc::format;
use alloc::vec::Vec;

pub use autoland::{AutoLand, AutoLandObserver, AutoLandObserverParams, AutoLandParams, CorridorWidths};
pub use drone::{DroneObserver, DroneObserverParams, DroneParams, DroneRace, GatePath};
pub use noise::{hash_quantized, unit_noise};

use crate::error::{GeometryError, SystemError};
use crate::geometry::{HyperRect, Interval, Scalar};
use crate::system::{Observer, Plant, Requirement};

/// Closed axis-aligned rectangle over a two-parameter environment.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Band {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Band {
    pub fn contains(&self, a: f64, b: f64) -> bool {
        a >= self.lo[0] && a <= self.hi[0] && b >= self.lo[1] && b <= self.hi[1]
    }
}

/// Boxes centered on `reference(t)` over `dims`, with half-widths
/// interpolated linearly from `(initial, final)` over `0..=horizon`.
pub fn corridor(
    reference: impl Fn(usize) -> Vec<f64>,
    dims: &[usize],
    half_widths: &[(f64, f64)],
    horizon: usize,
) -> Result<Requirement, SystemError> {
    if dims.len() != half_widths.len() {
        return Err(SystemError::InvalidParam("one half-width pair per constrained dimension".into()));
    }
    for &(a, b) in half_widths {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite()) {
            return Err(SystemError::InvalidParam(format!("half-widths must be non-negative, got ({a}, {b})")));
        }
        if b > a {
            return Err(SystemError::InvalidParam(format!("final half-width {b} exceeds initial {a}")));
        }
    }
    let boxes = (0..=horizon)
        .map(|t| {
            let r = reference(t);
            let u = if horizon == 0 { 0.0 } else { t as f64 / horizon as f64 };
            let dims = dims
                .iter()
                .zip(half_widths)
                .map(|(&d, &(a, b))| Interval::centered(r[d], a + (b - a) * u))
                .collect();
            HyperRect::new(dims)
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(Requirement::new(dims.to_vec(), boxes)?)
}

/// Either case-study plant behind one type.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedLoopSystem {
    AutoLand(AutoLand),
    DroneRace(DroneRace),
}

impl Plant for ClosedLoopSystem {
    fn name(&self) -> &str {
        match self {
            Self::AutoLand(p) => p.name(),
            Self::DroneRace(p) => p.name(),
        }
    }

    fn state_dim(&self) -> usize {
        match self {
            Self::AutoLand(p) => p.state_dim(),
            Self::DroneRace(p) => p.state_dim(),
        }
    }

    fn observed_dims(&self) -> &[usize] {
        match self {
            Self::AutoLand(p) => p.observed_dims(),
            Self::DroneRace(p) => p.observed_dims(),
        }
    }

    fn dt(&self) -> f64 {
        match self {
            Self::AutoLand(p) => p.dt(),
            Self::DroneRace(p) => p.dt(),
        }
    }

    fn reference(&self, t: usize) -> Vec<f64> {
        match self {
            Self::AutoLand(p) => p.reference(t),
            Self::DroneRace(p) => p.reference(t),
        }
    }

    fn step<S: Scalar>(&self, state: &[S], obs: &[S], t: usize) -> Result<Vec<S>, GeometryError> {
        match self {
            Self::AutoLand(p) => p.step(state, obs, t),
            Self::DroneRace(p) => p.step(state, obs, t),
        }
    }
}

/// Either synthetic observer behind one type.
#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticObserver {
    AutoLand(AutoLandObserver),
    DroneRace(DroneObserver),
}

impl Observer for SyntheticObserver {
    fn observe(&self, state: &[f64], env: &[f64]) -> Vec<f64> {
        match self {
            Self::AutoLand(o) => o.observe(state, env),
            Self::DroneRace(o) => o.observe(state, env),
        }
    }
}
