use alloc::vec::Vec;

use crate::env_grid::EnvGrid;
use crate::error::ContractError;
use crate::geometry::HyperRect;
use crate::rng::{self, tag};
use crate::system::Observer;

/// One labeled observation `<x, e, y>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
}

/// Environment set to draw from.
#[derive(Clone, Copy, Debug)]
pub enum EnvDomain<'a> {
    Box(&'a HyperRect),
    /// Only the active cells of the grid.
    Grid(&'a EnvGrid),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerKind {
    /// States uniform over `state_box`.
    UniformBox,
    /// Uniform time index along a reference trajectory, plus a uniform
    /// perturbation of up to `radius[i]` in each state coordinate.
    ReferenceTube { reference: Vec<Vec<f64>>, radius: Vec<f64> },
}

/// The sampling distribution for contract learning.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub state_box: HyperRect,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn uniform(state_box: HyperRect, seed: u64) -> Self {
        Self { kind: SamplerKind::UniformBox, state_box, seed }
    }

    pub fn reference_tube(state_box: HyperRect, reference: Vec<Vec<f64>>, radius: Vec<f64>, seed: u64) -> Self {
        Self { kind: SamplerKind::ReferenceTube { reference, radius }, state_box, seed }
    }

    /// One state from the distribution.
    pub fn draw_state(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>, ContractError> {
        match &self.kind {
            SamplerKind::UniformBox => Ok(self.state_box.lerp(&rng::unit_vec(rng, self.state_box.dim()))),
            SamplerKind::ReferenceTube { reference, radius } => {
                if reference.is_empty() {
                    return Err(ContractError::InvalidParam("reference-tube sampler needs a reference".into()));
                }
                if radius.len() != self.state_box.dim() {
                    return Err(ContractError::InvalidParam("tube radius has the wrong dimension".into()));
                }
                let k = libm::floor(rng::unit(rng) * reference.len() as f64) as usize;
                let base = &reference[k.min(reference.len() - 1)];
                Ok(base.iter().zip(radius).map(|(b, r)| b + r * (2.0 * rng::unit(rng) - 1.0)).collect())
            }
        }
    }
}

/// Draws `n` labeled samples. Sample `i` depends only on `(seed, i)`.
pub fn draw_samples<O: Observer + ?Sized>(
    env: EnvDomain<'_>,
    observer: &O,
    sampler: &SamplerSpec,
    n: usize,
) -> Result<Vec<Sample>, ContractError> {
    let active = match env {
        EnvDomain::Grid(g) => {
            let a = g.active_cells();
            if a.is_empty() {
                return Err(ContractError::SamplerExhausted);
            }
            a
        }
        EnvDomain::Box(_) => Vec::new(),
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::stream(sampler.seed, tag::CONTRACT_SAMPLE, i as u64);
        let x = sampler.draw_state(&mut r)?;
        let e = match env {
            EnvDomain::Box(b) => b.lerp(&rng::unit_vec(&mut r, b.dim())),
            EnvDomain::Grid(g) => g.sample_in(&active, &mut r).ok_or(ContractError::SamplerExhausted)?,
        };
        let y = observer.observe(&x, &e);
        out.push(Sample { x, e, y });
    }
    Ok(out)
}
