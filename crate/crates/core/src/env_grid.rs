//! Grid partition of the environment box with per-cell status.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{GeometryError, RefineError};
use crate::geometry::{HyperRect, Interval};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CellStatus {
    Active,
    Removed,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvCell {
    pub status: CellStatus,
    /// Conformance measured at the last probe, if any.
    pub conformance: Option<f64>,
    pub samples_seen: usize,
}

/// Uniform grid over an environment box. Cells are indexed row-major with
/// the last environment dimension varying fastest.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvGrid {
    bounds: HyperRect,
    resolution: Vec<usize>,
    cells: Vec<EnvCell>,
    nominal: Vec<f64>,
}

impl EnvGrid {
    pub fn new(bounds: HyperRect, resolution: Vec<usize>, nominal: Vec<f64>) -> Result<Self, RefineError> {
        if resolution.len() != bounds.dim() {
            return Err(GeometryError::DimensionMismatch { expected: bounds.dim(), found: resolution.len() }.into());
        }
        if resolution.iter().any(|&r| r == 0) {
            return Err(RefineError::InvalidParam("grid resolution must be positive".into()));
        }
        if !bounds.contains_point(&nominal)? {
            return Err(RefineError::InvalidParam("nominal environment lies outside the grid bounds".into()));
        }
        let count = resolution.iter().product();
        let cell = EnvCell { status: CellStatus::Active, conformance: None, samples_seen: 0 };
        Ok(Self { bounds, resolution, cells: vec![cell; count], nominal })
    }

    /// Same resolution per dimension.
    pub fn uniform(bounds: HyperRect, per_dim: usize, nominal: Vec<f64>) -> Result<Self, RefineError> {
        let n = bounds.dim();
        Self::new(bounds, vec![per_dim; n], nominal)
    }

    pub fn bounds(&self) -> &HyperRect {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[EnvCell] {
        &self.cells
    }

    pub fn cell(&self, idx: usize) -> &EnvCell {
        &self.cells[idx]
    }

    pub fn cell_mut(&mut self, idx: usize) -> &mut EnvCell {
        &mut self.cells[idx]
    }

    /// Per-dimension grid coordinates of a flat index.
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = idx % self.resolution[k];
            idx /= self.resolution[k];
        }
        out
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.resolution).fold(0, |acc, (&c, &r)| acc * r + c)
    }

    pub fn cell_bounds(&self, idx: usize) -> HyperRect {
        let coords = self.coords(idx);
        let dims = self
            .bounds
            .intervals()
            .iter()
            .zip(&self.resolution)
            .zip(&coords)
            .map(|((iv, &r), &c)| {
                let w = iv.width() / r as f64;
                let lo = iv.lo() + c as f64 * w;
                let hi = if c + 1 == r { iv.hi() } else { iv.lo() + (c + 1) as f64 * w };
                Interval::new(lo, hi).expect("ordered cell bounds")
            })
            .collect();
        HyperRect::new(dims).expect("nonempty cell")
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        self.cell_bounds(idx).center()
    }

    /// Cell containing `e`; points on an interior face go to the upper cell.
    pub fn cell_of(&self, e: &[f64]) -> Option<usize> {
        if !self.bounds.contains_point(e).ok()? {
            return None;
        }
        let coords: Vec<usize> = self
            .bounds
            .intervals()
            .iter()
            .zip(&self.resolution)
            .zip(e)
            .map(|((iv, &r), &v)| {
                let t = (v - iv.lo()) / iv.width();
                let c = libm::floor(t * r as f64);
                if c.is_nan() || c < 0.0 {
                    0
                } else {
                    (c as usize).min(r - 1)
                }
            })
            .collect();
        Some(self.flat_index(&coords))
    }

    pub fn nominal_cell(&self) -> usize {
        self.cell_of(&self.nominal).expect("nominal inside bounds")
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.cells[idx].status == CellStatus::Active
    }

    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.is_active(i)).collect()
    }

    pub fn removed_cells(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| !self.is_active(i)).collect()
    }

    pub fn active_count(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Active).count()
    }

    /// True when `e` falls in an active cell.
    pub fn contains_active(&self, e: &[f64]) -> bool {
        self.cell_of(e).is_some_and(|i| self.is_active(i))
    }

    /// Marks a cell removed. The nominal cell can never be removed.
    pub fn remove(&mut self, idx: usize) -> Result<(), RefineError> {
        if idx == self.nominal_cell() {
            return Err(RefineError::InvalidParam("the nominal environment cell cannot be removed".into()));
        }
        self.cells[idx].status = CellStatus::Removed;
        Ok(())
    }

    /// Distance between a cell center and the nominal point, with every
    /// coordinate normalized by the grid extent.
    pub fn normalized_distance_to_nominal(&self, idx: usize) -> f64 {
        let c = self.cell_center(idx);
        let d2: f64 = c
            .iter()
            .zip(&self.nominal)
            .zip(self.bounds.intervals())
            .map(|((a, b), iv)| {
                let w = if iv.width() > 0.0 { iv.width() } else { 1.0 };
                let d = (a - b) / w;
                d * d
            })
            .sum();
        libm::sqrt(d2)
    }

    /// Uniform point of the union of the listed cells.
    pub fn sample_in(&self, cells: &[usize], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        if cells.is_empty() {
            return None;
        }
        let k = libm::floor(rng::unit(rng) * cells.len() as f64) as usize;
        let cell = cells[k.min(cells.len() - 1)];
        let u = rng::unit_vec(rng, self.dim());
        Some(self.cell_bounds(cell).lerp(&u))
    }
}
