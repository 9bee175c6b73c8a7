//! Closed-loop system abstractions: plants, observers, requirements, and
//! simulation.

use alloc::vec::Vec;

use crate::error::GeometryError;
use crate::geometry::{HyperRect, Scalar};

/// Plant dynamics composed with its controller, as a discrete-time map
/// `x_{t+1} = step(x_t, y_t, t)` where `y_t` is the observation the
/// controller consumes.
///
/// `step` is generic so the same model runs over points, intervals, and
/// dual numbers.
pub trait Plant: Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    /// State coordinates the observer estimates, in observation order.
    fn observed_dims(&self) -> &[usize];
    fn obs_dim(&self) -> usize {
        self.observed_dims().len()
    }
    /// Duration of one step, in seconds.
    fn dt(&self) -> f64;
    /// Reference state at step `t`.
    fn reference(&self, t: usize) -> Vec<f64>;
    fn step<S: Scalar>(&self, state: &[S], obs: &[S], t: usize) -> Result<Vec<S>, GeometryError>;

    /// The observed coordinates of a state.
    fn project_observed(&self, state: &[f64]) -> Vec<f64> {
        self.observed_dims().iter().map(|&i| state[i]).collect()
    }
}

/// Black-box perception: `(state, environment) -> observation`.
pub trait Observer: Sync {
    fn observe(&self, state: &[f64], env: &[f64]) -> Vec<f64>;
}

impl<F> Observer for F
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
{
    fn observe(&self, state: &[f64], env: &[f64]) -> Vec<f64> {
        self(state, env)
    }
}

/// Observer that reports the observed coordinates of the true state.
#[derive(Clone, Debug)]
pub struct ExactObserver {
    pub observed_dims: Vec<usize>,
}

impl Observer for ExactObserver {
    fn observe(&self, state: &[f64], _env: &[f64]) -> Vec<f64> {
        self.observed_dims.iter().map(|&i| state[i]).collect()
    }
}

/// Time-indexed family of boxes over a subset of state coordinates.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Requirement {
    dim_mask: Vec<usize>,
    boxes: Vec<HyperRect>,
}

impl Requirement {
    /// `boxes[t]` constrains the masked coordinates at step `t`; the horizon
    /// is `boxes.len() - 1`.
    pub fn new(dim_mask: Vec<usize>, boxes: Vec<HyperRect>) -> Result<Self, GeometryError> {
        if boxes.is_empty() {
            return Err(GeometryError::Empty);
        }
        for b in &boxes {
            if b.dim() != dim_mask.len() {
                return Err(GeometryError::DimensionMismatch { expected: dim_mask.len(), found: b.dim() });
            }
        }
        Ok(Self { dim_mask, boxes })
    }

    pub fn dim_mask(&self) -> &[usize] {
        &self.dim_mask
    }

    pub fn horizon(&self) -> usize {
        self.boxes.len() - 1
    }

    pub fn at(&self, t: usize) -> &HyperRect {
        &self.boxes[t.min(self.boxes.len() - 1)]
    }

    pub fn boxes(&self) -> &[HyperRect] {
        &self.boxes
    }

    pub fn satisfied_by(&self, state: &[f64], t: usize) -> bool {
        let r = self.at(t);
        self.dim_mask.iter().zip(r.intervals()).all(|(&d, iv)| iv.contains(state[d]))
    }

    /// First step at which the trajectory leaves the requirement.
    pub fn first_violation(&self, states: &[Vec<f64>]) -> Option<usize> {
        states.iter().enumerate().find(|(t, s)| !self.satisfied_by(s, *t)).map(|(t, _)| t)
    }

    /// Truncates to a shorter horizon.
    pub fn truncated(&self, horizon: usize) -> Requirement {
        let n = (horizon + 1).min(self.boxes.len());
        Requirement { dim_mask: self.dim_mask.clone(), boxes: self.boxes[..n].to_vec() }
    }
}

/// An execution: states `x_0..=x_T`, and the observation `y_t` that produced
/// `x_{t+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub env: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }
}

/// Runs the closed loop with `y_t = observer(x_t, e)` for `horizon` steps.
pub fn simulate<P: Plant, O: Observer + ?Sized>(
    plant: &P,
    x0: &[f64],
    env: &[f64],
    observer: &O,
    horizon: usize,
) -> Result<Trajectory, GeometryError> {
    if x0.len() != plant.state_dim() {
        return Err(GeometryError::DimensionMismatch { expected: plant.state_dim(), found: x0.len() });
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);
    states.push(x0.to_vec());
    for t in 0..horizon {
        let x = &states[t];
        let y = observer.observe(x, env);
        if y.len() != plant.obs_dim() {
            return Err(GeometryError::DimensionMismatch { expected: plant.obs_dim(), found: y.len() });
        }
        let next = plant.step(x, &y, t)?;
        observations.push(y);
        states.push(next);
    }
    Ok(Trajectory { states, observations, env: env.to_vec() })
}
