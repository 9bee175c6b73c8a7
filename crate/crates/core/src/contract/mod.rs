//! Perception contracts: learning, calibration, and evaluation.
//!
//! A contract maps a state `x` to a box of admissible observations,
//! `M_c(x) +/- M_r(x)` per observation dimension. Centers come from least
//! squares; radii from quantile regression on the absolute center residuals
//! at the per-dimension quantile `(pr + eps)^(1/m)`, so the joint target is
//! `pr + eps` when dimensions behave independently. Joint coverage is always
//! recounted, never assumed.

mod features;
mod hoeffding;
mod regression;
mod sampler;

use alloc::format;
use alloc::vec::Vec;

pub use features::{FeatureMap, LinearModel};
pub use hoeffding::{epsilon_for_samples, required_samples};
pub use regression::{pinball_loss, QuantileFitReport};
pub use sampler::{draw_samples, EnvDomain, Sample, SamplerKind, SamplerSpec};

use regression::{least_squares, quantile_regression, Design};

use crate::error::{ContractError, GeometryError};
use crate::geometry::{HyperRect, Interval, Scalar};
use crate::system::Observer;

/// Calibration metadata recorded with every learned contract.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub pr: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub n_samples: usize,
    /// Quantile used for each per-dimension radius fit.
    pub quantile: f64,
    /// Joint empirical conformance on the training set.
    pub empirical_conformance: f64,
    pub per_dim_coverage: Vec<f64>,
    /// Training samples at which some radius model went negative and was clamped.
    pub clamp_count: usize,
}

/// `M(x) = [M_c(x) - M_r(x), M_c(x) + M_r(x)]` per observation dimension.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerceptionContract {
    pub feature_map: FeatureMap,
    /// Declared state domain the contract was learned over.
    pub domain: HyperRect,
    pub center: Vec<LinearModel>,
    pub radius: Vec<LinearModel>,
    pub calibration: Calibration,
}

/// Contract learning parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnParams {
    pub pr: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub feature_map: FeatureMap,
}

impl LearnParams {
    pub fn new(pr: f64, epsilon: f64, delta: f64) -> Self {
        Self { pr, epsilon, delta, feature_map: FeatureMap::Affine }
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if !(self.pr > 0.0 && self.pr < 1.0) {
            return Err(ContractError::InvalidParam(format!("pr must lie in (0, 1), got {}", self.pr)));
        }
        if !(self.pr + self.epsilon < 1.0) {
            return Err(ContractError::InvalidParam(format!(
                "pr + epsilon must be below 1, got {}",
                self.pr + self.epsilon
            )));
        }
        required_samples(self.epsilon, self.delta).map(|_| ())
    }
}

impl PerceptionContract {
    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.center.len()
    }

    pub fn center_at(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.feature_map.eval(x);
        self.center.iter().map(|m| m.eval_features(&phi)).collect()
    }

    /// Radii clamped at zero.
    pub fn radius_at(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.feature_map.eval(x);
        self.radius.iter().map(|m| m.eval_features(&phi).max(0.0)).collect()
    }

    /// Whether any radius model is negative (and therefore clamped) at `x`.
    pub fn clamps_at(&self, x: &[f64]) -> bool {
        let phi = self.feature_map.eval(x);
        self.radius.iter().any(|m| m.eval_features(&phi) < 0.0)
    }

    /// Center model evaluated over any scalar type.
    pub fn center_generic<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let phi = self.feature_map.eval_generic(x);
        self.center.iter().map(|m| m.eval_generic(&phi)).collect()
    }

    /// Per-dimension membership test `|y_j - M_c,j(x)| <= M_r,j(x)`.
    pub fn contains(&self, x: &[f64], y: &[f64]) -> bool {
        let c = self.center_at(x);
        let r = self.radius_at(x);
        y.iter().zip(&c).zip(&r).all(|((y, c), r)| (y - c).abs() <= *r)
    }

    /// Projects `y` onto `M(x)` coordinatewise.
    pub fn clamp_observation(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let c = self.center_at(x);
        let r = self.radius_at(x);
        y.iter().zip(&c).zip(&r).map(|((y, c), r)| y.max(c - r).min(c + r)).collect()
    }

    /// Upper bound of the clamped radius of each dimension over a state box.
    pub fn radius_bound(&self, state_box: &HyperRect) -> Result<Vec<f64>, GeometryError> {
        self.radius
            .iter()
            .map(|m| Ok(self.feature_map.interval_eval(&m.coeffs, m.intercept, state_box)?.hi().max(0.0)))
            .collect()
    }

    /// True when the box leaves the declared domain (the contract extrapolates).
    pub fn extrapolates(&self, state_box: &HyperRect) -> bool {
        !self.domain.contains_rect(state_box).unwrap_or(false)
    }

    /// Box containing `M(x)` for every `x` in `state_box`.
    pub fn output_set(&self, state_box: &HyperRect) -> Result<HyperRect, GeometryError> {
        if state_box.dim() != self.state_dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.state_dim(), found: state_box.dim() });
        }
        let radius = self.radius_bound(state_box)?;
        let dims = self
            .center
            .iter()
            .zip(radius)
            .map(|(m, r)| Ok(self.feature_map.interval_eval(&m.coeffs, m.intercept, state_box)?.inflate(r)))
            .collect::<Result<Vec<Interval>, GeometryError>>()?;
        HyperRect::new(dims)
    }
}

/// `contract_output_set`: the observation box over a state box.
pub fn contract_output_set(contract: &PerceptionContract, state_box: &HyperRect) -> Result<HyperRect, GeometryError> {
    contract.output_set(state_box)
}

/// Fraction of samples whose observation lies in `M(x)` in every dimension.
pub fn empirical_conformance(contract: &PerceptionContract, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|s| contract.contains(&s.x, &s.y)).count();
    hits as f64 / samples.len() as f64
}

/// Per-dimension coverage fractions.
pub fn per_dim_coverage(contract: &PerceptionContract, samples: &[Sample]) -> Vec<f64> {
    let m = contract.obs_dim();
    let mut hits = alloc::vec![0usize; m];
    for s in samples {
        let c = contract.center_at(&s.x);
        let r = contract.radius_at(&s.x);
        for j in 0..m {
            if (s.y[j] - c[j]).abs() <= r[j] {
                hits[j] += 1;
            }
        }
    }
    hits.into_iter().map(|h| h as f64 / samples.len().max(1) as f64).collect()
}

fn feature_rows(xs: &[&[f64]], fm: FeatureMap) -> Vec<Vec<f64>> {
    xs.iter().map(|x| fm.eval(x)).collect()
}

fn check_obs_dims(samples: &[Sample]) -> Result<usize, ContractError> {
    let m = samples.first().map_or(0, |s| s.y.len());
    if m == 0 {
        return Err(ContractError::InvalidParam("samples carry no observations".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.y.len() != m || s.y.iter().any(|v| !v.is_finite())) {
        return Err(ContractError::InvalidParam(format!("malformed observation {:?}", s.y)));
    }
    Ok(m)
}

/// Least-squares center model for each observation dimension.
pub fn fit_center(samples: &[Sample], fm: FeatureMap) -> Result<Vec<LinearModel>, ContractError> {
    let m = check_obs_dims(samples)?;
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let design = Design::new(&feature_rows(&xs, fm))?;
    (0..m)
        .map(|j| {
            let y: Vec<f64> = samples.iter().map(|s| s.y[j]).collect();
            Ok(design.to_model(&least_squares(&design, &y)?))
        })
        .collect()
}

/// Pinball-loss radius model at `quantile` for residuals `r_i >= 0` at `x_i`.
pub fn fit_radius(
    xs: &[&[f64]],
    residuals: &[f64],
    quantile: f64,
    fm: FeatureMap,
) -> Result<(LinearModel, QuantileFitReport), ContractError> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(ContractError::InvalidParam(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    if xs.len() != residuals.len() {
        return Err(ContractError::InvalidParam("residual count differs from state count".into()));
    }
    if residuals.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(ContractError::InvalidParam("residuals must be finite and non-negative".into()));
    }
    let design = Design::new(&feature_rows(xs, fm))?;
    let (beta, report) = quantile_regression(&design, residuals, quantile)?;
    Ok((design.to_model(&beta), report))
}

/// Fits center and radius models to a fixed sample set and records
/// calibration against it.
pub fn fit_contract(
    domain: &HyperRect,
    samples: &[Sample],
    pr: f64,
    epsilon: f64,
    delta: f64,
    fm: FeatureMap,
) -> Result<PerceptionContract, ContractError> {
    let m = check_obs_dims(samples)?;
    let target = pr + epsilon;
    if !(target > 0.0 && target < 1.0) {
        return Err(ContractError::InvalidParam(format!("pr + epsilon must lie in (0, 1), got {target}")));
    }
    if let Some(s) = samples.iter().find(|s| s.x.len() != domain.dim()) {
        return Err(GeometryError::DimensionMismatch { expected: domain.dim(), found: s.x.len() }.into());
    }
    let quantile = libm::pow(target, 1.0 / m as f64);
    let center = fit_center(samples, fm)?;
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let phis: Vec<Vec<f64>> = feature_rows(&xs, fm);
    let mut radius = Vec::with_capacity(m);
    for (j, cm) in center.iter().enumerate() {
        let r: Vec<f64> = samples.iter().zip(&phis).map(|(s, phi)| (s.y[j] - cm.eval_features(phi)).abs()).collect();
        let (model, _) = fit_radius(&xs, &r, quantile, fm)?;
        radius.push(model);
    }
    let mut contract = PerceptionContract {
        feature_map: fm,
        domain: domain.clone(),
        center,
        radius,
        calibration: Calibration {
            pr,
            epsilon,
            delta,
            n_samples: samples.len(),
            quantile,
            empirical_conformance: 0.0,
            per_dim_coverage: Vec::new(),
            clamp_count: 0,
        },
    };
    contract.calibration.empirical_conformance = empirical_conformance(&contract, samples);
    contract.calibration.per_dim_coverage = per_dim_coverage(&contract, samples);
    contract.calibration.clamp_count = samples.iter().filter(|s| contract.clamps_at(&s.x)).count();
    Ok(contract)
}

/// Learns a contract from a pre-collected data set: the gap follows from the
/// sample count, and radii are fitted at `pr + epsilon(n, delta)`.
pub fn learn_contract_fixed(
    domain: &HyperRect,
    samples: &[Sample],
    pr: f64,
    delta: f64,
    fm: FeatureMap,
) -> Result<PerceptionContract, ContractError> {
    let epsilon = epsilon_for_samples(samples.len(), delta)?;
    fit_contract(domain, samples, pr, epsilon, delta, fm)
}

/// Draws `required_samples(epsilon, delta)` labeled samples and fits a
/// contract at quantile `pr + epsilon`.
pub fn learn_contract<O: Observer + ?Sized>(
    domain: &HyperRect,
    env: EnvDomain<'_>,
    observer: &O,
    params: &LearnParams,
    sampler: &SamplerSpec,
) -> Result<PerceptionContract, ContractError> {
    params.validate()?;
    let n = required_samples(params.epsilon, params.delta)?;
    let samples = draw_samples(env, observer, sampler, n)?;
    fit_contract(domain, &samples, params.pr, params.epsilon, params.delta, params.feature_map)
}
