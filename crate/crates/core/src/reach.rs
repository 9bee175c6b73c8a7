//! Reachable-set over-approximation of the contract-closed loop.
//!
//! [`step_reach`] is the plain box image: the observation box from the
//! contract, pushed with the state box through the interval extension of the
//! plant step. [`reach_tube`] iterates either that map or an affine-form
//! propagation that keeps the linear correlations between state coordinates
//! and between the state and its contract center. Both are sound; the affine
//! form avoids the wrapping growth that makes long box iterations vacuous.

use alloc::vec;
use alloc::vec::Vec;

use crate::contract::PerceptionContract;
use crate::error::{GeometryError, ReachError};
use core::cmp::Ordering;

use crate::geometry::{Dual, HyperRect, Interval, Scalar};
use crate::system::{Plant, Requirement};

/// Per-step boxes `steps[0..=horizon]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReachTube {
    pub steps: Vec<HyperRect>,
    pub dt: f64,
}

impl ReachTube {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    /// Componentwise inclusion of every step.
    pub fn contains_tube(&self, other: &ReachTube) -> bool {
        self.steps.len() == other.steps.len()
            && self.steps.iter().zip(&other.steps).all(|(a, b)| a.contains_rect(b).unwrap_or(false))
    }

    pub fn max_width(&self) -> f64 {
        self.steps.iter().map(HyperRect::max_width).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum VerdictKind {
    Contained,
    PartialExit,
    FullExit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TubeVerdict {
    pub kind: VerdictKind,
    pub first_violation_t: Option<usize>,
}

impl TubeVerdict {
    pub fn contained() -> Self {
        Self { kind: VerdictKind::Contained, first_violation_t: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ReachMethod {
    /// Iterated [`step_reach`].
    Interval,
    /// Affine forms with a mean-value linearization per step.
    AffineForm,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReachOptions {
    pub method: ReachMethod,
    /// Per-state-dimension width cap; `None` disables blowup detection.
    pub width_cap: Option<Vec<f64>>,
    /// Generator budget of the affine form, as a multiple of the state dimension.
    pub generator_factor: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self { method: ReachMethod::AffineForm, width_cap: None, generator_factor: 20 }
    }
}

impl ReachOptions {
    /// Caps constrained coordinates at `factor` times their initial
    /// requirement width; other coordinates are uncapped.
    pub fn with_requirement_cap(mut self, req: &Requirement, state_dim: usize, factor: f64) -> Self {
        let mut cap = vec![f64::INFINITY; state_dim];
        for (iv, &d) in req.at(0).intervals().iter().zip(req.dim_mask()) {
            cap[d] = factor * iv.width();
        }
        self.width_cap = Some(cap);
        self
    }
}

fn check_dims<P: Plant>(x: &HyperRect, contract: &PerceptionContract, plant: &P) -> Result<(), GeometryError> {
    if x.dim() != plant.state_dim() {
        return Err(GeometryError::DimensionMismatch { expected: plant.state_dim(), found: x.dim() });
    }
    if contract.state_dim() != plant.state_dim() {
        return Err(GeometryError::DimensionMismatch { expected: plant.state_dim(), found: contract.state_dim() });
    }
    if contract.obs_dim() != plant.obs_dim() {
        return Err(GeometryError::DimensionMismatch { expected: plant.obs_dim(), found: contract.obs_dim() });
    }
    Ok(())
}

/// Box containing `f(x, y)` for every `x` in `x_t` and every `y` in the
/// contract output set over `x_t`.
pub fn step_reach<P: Plant>(
    x_t: &HyperRect,
    contract: &PerceptionContract,
    plant: &P,
    t: usize,
) -> Result<HyperRect, GeometryError> {
    check_dims(x_t, contract, plant)?;
    let obs = contract.output_set(x_t)?;
    let next = plant.step::<Interval>(x_t.intervals(), obs.intervals(), t)?;
    HyperRect::new(next)
}

/// Reach tube from `x_c` over `horizon` steps.
pub fn reach_tube<P: Plant>(
    x_c: &HyperRect,
    contract: &PerceptionContract,
    plant: &P,
    horizon: usize,
    opts: &ReachOptions,
) -> Result<ReachTube, ReachError> {
    match reach_prefix(x_c, contract, plant, horizon, opts)? {
        (tube, None) => Ok(tube),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`reach_tube`], but a failure part way through returns the steps
/// computed before it along with the error.
pub fn reach_prefix<P: Plant>(
    x_c: &HyperRect,
    contract: &PerceptionContract,
    plant: &P,
    horizon: usize,
    opts: &ReachOptions,
) -> Result<(ReachTube, Option<ReachError>), ReachError> {
    if horizon == 0 {
        return Err(ReachError::InvalidParam("horizon must be at least 1".into()));
    }
    check_dims(x_c, contract, plant)?;
    if let Some(cap) = &opts.width_cap {
        if cap.len() != x_c.dim() {
            return Err(GeometryError::DimensionMismatch { expected: x_c.dim(), found: cap.len() }.into());
        }
    }
    let mut steps = Vec::with_capacity(horizon + 1);
    steps.push(x_c.clone());
    let stopped = extend(&mut steps, contract, plant, horizon, opts).err();
    Ok((ReachTube { steps, dt: plant.dt() }, stopped))
}

fn extend<P: Plant>(
    steps: &mut Vec<HyperRect>,
    contract: &PerceptionContract,
    plant: &P,
    horizon: usize,
    opts: &ReachOptions,
) -> Result<(), ReachError> {
    let x_c = steps[0].clone();
    match opts.method {
        ReachMethod::Interval => {
            for t in 0..horizon {
                let next = step_reach(&steps[t], contract, plant, t)?;
                check_cap(&next, opts, t + 1)?;
                steps.push(next);
            }
        }
        ReachMethod::AffineForm => {
            let max_gens = opts.generator_factor.max(1) * x_c.dim();
            let mut set = AffineSet::from_box(&x_c);
            for t in 0..horizon {
                set = set.step(contract, plant, t)?;
                set.reduce(max_gens);
                let next = set.hull()?;
                check_cap(&next, opts, t + 1)?;
                steps.push(next);
            }
        }
    }
    Ok(())
}

fn check_cap(b: &HyperRect, opts: &ReachOptions, step: usize) -> Result<(), ReachError> {
    if let Some(cap) = &opts.width_cap {
        for (dim, (w, &c)) in b.widths().into_iter().zip(cap).enumerate() {
            if !(w <= c) {
                return Err(ReachError::Blowup { step, dim, width: w, cap: c });
            }
        }
    }
    Ok(())
}

/// Classifies a tube against a requirement. A full exit anywhere wins over
/// an earlier partial exit.
pub fn check_tube(tube: &ReachTube, req: &Requirement) -> TubeVerdict {
    let mut partial = None;
    for (t, b) in tube.steps.iter().enumerate() {
        let Ok(proj) = b.project(req.dim_mask()) else {
            return TubeVerdict { kind: VerdictKind::FullExit, first_violation_t: Some(t) };
        };
        let r = req.at(t);
        if !proj.intersects(r).unwrap_or(false) {
            return TubeVerdict { kind: VerdictKind::FullExit, first_violation_t: Some(t) };
        }
        if partial.is_none() && !r.contains_rect(&proj).unwrap_or(false) {
            partial = Some(t);
        }
    }
    match partial {
        Some(t) => TubeVerdict { kind: VerdictKind::PartialExit, first_violation_t: Some(t) },
        None => TubeVerdict::contained(),
    }
}

/// Plant step at the point `z = (x, d)` built by `var`, with the
/// observation taken as the contract center plus `d`.
fn eval_at<P: Plant, S: Scalar>(
    contract: &PerceptionContract,
    plant: &P,
    t: usize,
    n: usize,
    var: impl Fn(usize) -> S,
) -> Result<Vec<S>, GeometryError> {
    let nv = n + plant.obs_dim();
    let z: Vec<S> = (0..nv).map(var).collect();
    let obs: Vec<S> = contract.center_generic(&z[..n]).into_iter().zip(z[n..].iter().cloned()).map(|(c, d)| c + d).collect();
    plant.step(&z[..n], &obs, t)
}

/// Relative inflation absorbing the rounding of sums of non-negative terms.
const SUM_INFLATION: f64 = 1e-12;

fn inflate_up(v: f64) -> f64 {
    (v * (1.0 + SUM_INFLATION)).next_up()
}

/// `{ c + G xi : xi in [-1, 1]^k }`, generators stored as columns.
#[derive(Clone, Debug)]
struct AffineSet {
    center: Vec<f64>,
    gens: Vec<Vec<f64>>,
}

impl AffineSet {
    fn from_box(b: &HyperRect) -> Self {
        let n = b.dim();
        let center = b.center();
        let mut gens = Vec::with_capacity(n);
        for (i, iv) in b.intervals().iter().enumerate() {
            let r = inflate_up((iv.hi() - center[i]).max(center[i] - iv.lo()));
            if r > 0.0 {
                let mut g = vec![0.0; n];
                g[i] = r;
                gens.push(g);
            }
        }
        Self { center, gens }
    }

    fn radius(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.center.len()];
        for g in &self.gens {
            for (ri, gi) in r.iter_mut().zip(g) {
                *ri += gi.abs();
            }
        }
        r.into_iter().map(inflate_up).collect()
    }

    fn hull(&self) -> Result<HyperRect, GeometryError> {
        let dims = self
            .center
            .iter()
            .zip(self.radius())
            .map(|(&c, r)| Interval::new((c - r).next_down(), (c + r).next_up()))
            .collect::<Result<Vec<_>, _>>()?;
        HyperRect::new(dims)
    }

    /// Image under `x -> step(x, M_c(x) + d, t)` with `|d_j| <= rbar_j`,
    /// by a mean-value form around `(c, 0)` over the hull.
    fn step<P: Plant>(&self, contract: &PerceptionContract, plant: &P, t: usize) -> Result<AffineSet, GeometryError> {
        let n = self.center.len();
        let m = plant.obs_dim();
        let hull = self.hull()?;
        let rad = self.radius();
        let rbar = contract.radius_bound(&hull)?;
        let nv = n + m;

        let xc: Vec<Interval> = self.center.iter().map(|&v| Interval::point(v)).collect();
        let yc = contract.center_generic(&xc);
        let f0 = plant.step(&xc, &yc, t)?;

        // Sequential second-order form: the increment in variable j is
        // expanded around its center with earlier variables spanning their
        // range and later ones held at the center, so cross terms are counted
        // once and curvature gives a one-sided term.
        let full: Vec<Interval> = hull
            .intervals()
            .iter()
            .copied()
            .chain(rbar.iter().map(|&r| Interval::centered(0.0, r)))
            .collect();
        let at_center: Vec<Interval> = xc.iter().copied().chain(core::iter::repeat(Interval::point(0.0)).take(m)).collect();
        let mut jm = vec![vec![0.0; nv]; n];
        let mut rem = vec![Interval::point(0.0); n];
        let mut mag = vec![0.0; n];
        for j in 0..nv {
            let zr = if j < n { rad[j] } else { rbar[j - n] };
            if zr == 0.0 {
                continue;
            }
            let slope = eval_at(contract, plant, t, n, |k| match k.cmp(&j) {
                Ordering::Less => Dual::constant(full[k]),
                Ordering::Equal => Dual::var(at_center[k], 0, 1),
                Ordering::Greater => Dual::constant(at_center[k]),
            })?;
            let curv = eval_at(contract, plant, t, n, |k| match k.cmp(&j) {
                Ordering::Less => Dual::constant(Dual::constant(full[k])),
                Ordering::Equal => Dual { value: Dual::var(full[k], 0, 1), partials: vec![Dual::constant(Interval::point(1.0))] },
                Ordering::Greater => Dual::constant(Dual::constant(at_center[k])),
            })?;
            let s = Interval::centered(0.0, zr);
            let s2 = Interval::new(0.0, (zr * zr).next_up())?;
            for i in 0..n {
                let d0 = slope[i].partial(0);
                let mid = d0.mid();
                jm[i][j] = mid;
                mag[i] += mid.abs() * zr;
                let outer = curv[i].partial(0);
                let first = (outer.value - Interval::point(mid)) * s;
                let second = (d0 - Interval::point(mid)) * s + outer.partial(0).scale(0.5) * s2;
                rem[i] = rem[i] + first.intersection(&second).unwrap_or(first);
            }
        }
        let gamma = 4.0 * (nv + 2) as f64 * f64::EPSILON;

        let mut center = Vec::with_capacity(n);
        let mut slack = Vec::with_capacity(n);
        for i in 0..n {
            let total = f0[i] + rem[i];
            let c = total.mid();
            let off = (total.hi() - c).max(c - total.lo());
            slack.push(inflate_up(off + gamma * mag[i]) + f64::MIN_POSITIVE);
            center.push(c);
        }

        let mut gens = Vec::with_capacity(self.gens.len() + m + n);
        for g in &self.gens {
            let ng: Vec<f64> = (0..n).map(|i| (0..n).map(|j| jm[i][j] * g[j]).sum()).collect();
            gens.push(ng);
        }
        for j in 0..m {
            if rbar[j] > 0.0 {
                gens.push((0..n).map(|i| jm[i][n + j] * rbar[j]).collect());
            }
        }
        for (i, s) in slack.into_iter().enumerate() {
            let mut g = vec![0.0; n];
            g[i] = s;
            gens.push(g);
        }
        gens.retain(|g| g.iter().any(|v| *v != 0.0));
        Ok(AffineSet { center, gens })
    }

    /// Girard reduction: boxes the generators with the smallest
    /// `|g|_1 - |g|_inf` until at most `max_gens` remain.
    fn reduce(&mut self, max_gens: usize) {
        let n = self.center.len();
        if self.gens.len() <= max_gens {
            return;
        }
        let keep = max_gens.saturating_sub(n);
        let score = |g: &Vec<f64>| {
            let l1: f64 = g.iter().map(|v| v.abs()).sum();
            let linf = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            l1 - linf
        };
        let mut order: Vec<usize> = (0..self.gens.len()).collect();
        order.sort_by(|&a, &b| score(&self.gens[b]).total_cmp(&score(&self.gens[a])).then(a.cmp(&b)));
        let mut boxed = vec![0.0; n];
        let mut kept = Vec::with_capacity(max_gens);
        for (rank, &k) in order.iter().enumerate() {
            if rank < keep {
                kept.push(core::mem::take(&mut self.gens[k]));
            } else {
                for (b, v) in boxed.iter_mut().zip(&self.gens[k]) {
                    *b += v.abs();
                }
            }
        }
        for (i, b) in boxed.into_iter().enumerate() {
            if b > 0.0 {
                let mut g = vec![0.0; n];
                g[i] = inflate_up(b);
                kept.push(g);
            }
        }
        self.gens = kept;
    }
}
