//! Least-squares and quantile (pinball-loss) regression over a standardized
//! design matrix.
//!
//! The quantile fit solves the linear program exactly in the sense of LP
//! duality: a Mehrotra predictor-corrector interior-point method on the
//! bounded dual, followed by a vertex step that interpolates `p` observations
//! and is kept whenever it does not increase the pinball loss.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::features::LinearModel;
use crate::error::ContractError;

/// Relative eigenvalue threshold below which the Gram matrix is declared
/// rank-deficient.
const RANK_TOL: f64 = 1e-10;
const IPM_MAX_ITER: usize = 200;
const IPM_GAP_TOL: f64 = 1e-12;
const STEP_DAMPING: f64 = 0.99995;

/// Design matrix `[1, (phi - mean) / scale]` stored row-major.
#[derive(Clone, Debug)]
pub(crate) struct Design {
    n: usize,
    p: usize,
    rows: Vec<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Design {
    /// Standardizes feature rows; every row must have the same length.
    pub(crate) fn new(features: &[Vec<f64>]) -> Result<Self, ContractError> {
        let n = features.len();
        let k = features.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; k];
        for row in features {
            if row.len() != k {
                return Err(ContractError::InvalidParam("ragged feature rows".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ContractError::InvalidParam("non-finite feature value".into()));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        let mut scale = vec![0.0; k];
        for row in features {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = Vec::new();
        for (j, s) in scale.iter_mut().enumerate() {
            *s = libm::sqrt(*s / n.max(1) as f64);
            if !(*s > 0.0) {
                constant.push(j);
            }
        }
        if !constant.is_empty() {
            return Err(ContractError::SingularDesign { collinear: constant });
        }
        let p = k + 1;
        let mut rows = Vec::with_capacity(n * p);
        for row in features {
            rows.push(1.0);
            for ((v, m), s) in row.iter().zip(&mean).zip(&scale) {
                rows.push((v - m) / s);
            }
        }
        Ok(Self { n, p, rows, mean, scale })
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn p(&self) -> usize {
        self.p
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    fn predict(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), beta)).collect()
    }

    /// `sum_i w_i z_i z_i^T`.
    fn weighted_gram(&self, w: Option<&[f64]>) -> DMatrix<f64> {
        let p = self.p;
        let mut g = DMatrix::<f64>::zeros(p, p);
        for i in 0..self.n {
            let z = self.row(i);
            let wi = w.map_or(1.0, |w| w[i]);
            for a in 0..p {
                let za = wi * z[a];
                for b in a..p {
                    g[(a, b)] += za * z[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// `sum_i v_i z_i`.
    fn t_mul(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(self.p);
        for i in 0..self.n {
            let z = self.row(i);
            for a in 0..self.p {
                out[a] += v[i] * z[a];
            }
        }
        out
    }

    /// Maps standardized coefficients back to raw features.
    pub(crate) fn to_model(&self, beta: &[f64]) -> LinearModel {
        let coeffs: Vec<f64> = beta[1..].iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let intercept = beta[0] - coeffs.iter().zip(&self.mean).map(|(c, m)| c * m).sum::<f64>();
        LinearModel { coeffs, intercept }
    }

    /// Columns participating in a near-null direction of the Gram matrix,
    /// reported as feature indices (the intercept is omitted).
    fn collinear_columns(&self, gram: &DMatrix<f64>) -> Vec<usize> {
        let scaled = gram / (self.n.max(1) as f64);
        let eig = scaled.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
        let mut cols = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= RANK_TOL * top {
                for j in 1..self.p {
                    if eig.eigenvectors[(j, k)].abs() > 0.1 && !cols.contains(&(j - 1)) {
                        cols.push(j - 1);
                    }
                }
            }
        }
        cols.sort_unstable();
        cols
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let ridge = 1e-13 * m.trace().abs().max(1e-300);
    let mut r = m.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += ridge;
    }
    r.cholesky().map(|ch| ch.solve(rhs))
}

/// Ordinary least squares of `y` on the design, in standardized coordinates.
pub(crate) fn least_squares(design: &Design, y: &[f64]) -> Result<Vec<f64>, ContractError> {
    if design.n() < design.p() {
        return Err(ContractError::TooFewSamples { needed: design.p(), got: design.n() });
    }
    let gram = design.weighted_gram(None);
    let collinear = design.collinear_columns(&gram);
    if !collinear.is_empty() {
        return Err(ContractError::SingularDesign { collinear });
    }
    let rhs = design.t_mul(y);
    let beta = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| ContractError::SingularDesign { collinear: Vec::new() })?;
    Ok(beta.iter().cloned().collect())
}

/// Pinball (check) loss at quantile `tau`:
/// `(1 - tau) * sum_{r < m} (m - r) + tau * sum_{r >= m} (r - m)`.
pub fn pinball_loss(tau: f64, observed: &[f64], fitted: &[f64]) -> f64 {
    observed
        .iter()
        .zip(fitted)
        .map(|(&r, &m)| if r >= m { tau * (r - m) } else { (1.0 - tau) * (m - r) })
        .sum()
}

/// Diagnostics from a quantile fit.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFitReport {
    pub iterations: usize,
    pub duality_gap: f64,
    pub loss: f64,
    /// True when the interpolating vertex replaced the interior-point iterate.
    pub vertex: bool,
}

/// Minimizes the pinball loss at `tau` over linear functions of the design.
pub(crate) fn quantile_regression(
    design: &Design,
    y: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, QuantileFitReport), ContractError> {
    let (n, p) = (design.n(), design.p());
    if n < p {
        return Err(ContractError::TooFewSamples { needed: p, got: n });
    }
    let ols = least_squares(design, y)?;

    // Bounded dual: min -y.a  s.t. Z^T a = (1 - tau) Z^T 1,  0 <= a <= 1.
    // The equality multipliers are minus the regression coefficients.
    let b = design.t_mul(&vec![1.0 - tau; n]);
    let mut a = vec![1.0 - tau; n];
    let mut s = vec![tau; n];
    let mut beta = DVector::from_iterator(p, ols.iter().map(|v| -v));
    let fit = design.predict(&ols);
    let res: Vec<f64> = y.iter().zip(&fit).map(|(y, f)| y - f).collect();
    let mean_abs = res.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let theta = 0.5 * mean_abs + 1e-8 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut z: Vec<f64> = res.iter().map(|r| (-r).max(0.0) + theta).collect();
    let mut w: Vec<f64> = res.iter().map(|r| r.max(0.0) + theta).collect();

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let scale = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>();
    while iterations < IPM_MAX_ITER {
        gap = dot(&a, &z) + dot(&s, &w);
        if gap <= IPM_GAP_TOL * scale {
            break;
        }
        iterations += 1;

        // Residuals.
        let za = design.t_mul(&a);
        let r_p: DVector<f64> = &b - &za;
        let zb = design.predict(beta.as_slice());
        let r_d: Vec<f64> = (0..n).map(|i| -y[i] - zb[i] - z[i] + w[i]).collect();
        let d: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / a[i] + w[i] / s[i])).collect();
        let m = design.weighted_gram(Some(&d));

        let solve = |t1: &[f64], t2: &[f64]| -> Option<(Vec<f64>, DVector<f64>, Vec<f64>, Vec<f64>)> {
            let rt: Vec<f64> = (0..n).map(|i| r_d[i] - t1[i] / a[i] + t2[i] / s[i]).collect();
            let drt: Vec<f64> = (0..n).map(|i| d[i] * rt[i]).collect();
            let rhs = &r_p + design.t_mul(&drt);
            let dbeta = solve_spd(&m, &rhs)?;
            let atb = design.predict(dbeta.as_slice());
            let da: Vec<f64> = (0..n).map(|i| d[i] * (atb[i] - rt[i])).collect();
            let dz: Vec<f64> = (0..n).map(|i| (t1[i] - z[i] * da[i]) / a[i]).collect();
            let dw: Vec<f64> = (0..n).map(|i| (t2[i] + w[i] * da[i]) / s[i]).collect();
            Some((da, dbeta, dz, dw))
        };

        // Predictor.
        let t1: Vec<f64> = (0..n).map(|i| -a[i] * z[i]).collect();
        let t2: Vec<f64> = (0..n).map(|i| -s[i] * w[i]).collect();
        let (da, _, dz, dw) =
            solve(&t1, &t2).ok_or(ContractError::SolverFailure { iterations, gap })?;
        let (ap, ad) = step_lengths(&a, &s, &z, &w, &da, &dz, &dw);
        let mu = gap / (2 * n) as f64;
        let mut mu_aff = 0.0;
        for i in 0..n {
            mu_aff += (a[i] + ap * da[i]) * (z[i] + ad * dz[i]) + (s[i] - ap * da[i]) * (w[i] + ad * dw[i]);
        }
        mu_aff /= (2 * n) as f64;
        let sigma = libm::pow(mu_aff / mu, 3.0).min(1.0);

        // Corrector.
        let t1: Vec<f64> = (0..n).map(|i| sigma * mu - a[i] * z[i] - da[i] * dz[i]).collect();
        let t2: Vec<f64> = (0..n).map(|i| sigma * mu - s[i] * w[i] + da[i] * dw[i]).collect();
        let (da, dbeta, dz, dw) =
            solve(&t1, &t2).ok_or(ContractError::SolverFailure { iterations, gap })?;
        let (ap, ad) = step_lengths(&a, &s, &z, &w, &da, &dz, &dw);
        let (ap, ad) = ((STEP_DAMPING * ap).min(1.0), (STEP_DAMPING * ad).min(1.0));
        for i in 0..n {
            a[i] += ap * da[i];
            s[i] -= ap * da[i];
            z[i] += ad * dz[i];
            w[i] += ad * dw[i];
        }
        beta += dbeta * ad;
        if !gap.is_finite() {
            return Err(ContractError::SolverFailure { iterations, gap });
        }
    }

    let coef: Vec<f64> = beta.iter().map(|v| -v).collect();
    let fitted = design.predict(&coef);
    let ipm_loss = pinball_loss(tau, y, &fitted);
    let converged = gap <= IPM_GAP_TOL * scale;

    let mut report = QuantileFitReport { iterations, duality_gap: gap, loss: ipm_loss, vertex: false };
    let mut best = coef;
    if let Some(vertex) = interpolating_vertex(design, y, &fitted) {
        let vloss = pinball_loss(tau, y, &design.predict(&vertex));
        if vloss <= ipm_loss * (1.0 + 1e-12) + 1e-300 {
            best = vertex;
            report.loss = vloss;
            report.vertex = true;
        }
    }
    if !converged && !report.vertex {
        return Err(ContractError::SolverFailure { iterations, gap });
    }
    Ok((best, report))
}

fn max_step(x: &[f64], dx: &[f64], sign: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xi, di) in x.iter().zip(dx) {
        let d = sign * di;
        if d < 0.0 {
            alpha = alpha.min(-xi / d);
        }
    }
    alpha
}

fn step_lengths(a: &[f64], s: &[f64], z: &[f64], w: &[f64], da: &[f64], dz: &[f64], dw: &[f64]) -> (f64, f64) {
    let ap = max_step(a, da, 1.0).min(max_step(s, da, -1.0)).min(1.0);
    let ad = max_step(z, dz, 1.0).min(max_step(w, dw, 1.0)).min(1.0);
    (ap, ad)
}

/// Coefficients that interpolate the `p` observations closest to the current
/// fit (chosen greedily to be linearly independent).
fn interpolating_vertex(design: &Design, y: &[f64], fitted: &[f64]) -> Option<Vec<f64>> {
    let p = design.p();
    let mut order: Vec<usize> = (0..design.n()).collect();
    order.sort_by(|&i, &j| {
        let ri = (y[i] - fitted[i]).abs();
        let rj = (y[j] - fitted[j]).abs();
        ri.total_cmp(&rj).then(i.cmp(&j))
    });
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &i in &order {
        if chosen.len() == p {
            break;
        }
        let row = design.row(i);
        let mut v = row.to_vec();
        for q in &basis {
            let c = dot(&v, q);
            for (vk, qk) in v.iter_mut().zip(q) {
                *vk -= c * qk;
            }
        }
        let norm = libm::sqrt(dot(&v, &v));
        let rnorm = libm::sqrt(dot(row, row));
        if norm > 1e-8 * rnorm.max(1.0) {
            basis.push(v.into_iter().map(|x| x / norm).collect());
            chosen.push(i);
        }
    }
    if chosen.len() < p {
        return None;
    }
    let h = DMatrix::from_fn(p, p, |r, c| design.row(chosen[r])[c]);
    let rhs = DVector::from_iterator(p, chosen.iter().map(|&i| y[i]));
    let sol = h.lu().solve(&rhs)?;
    Some(sol.iter().cloned().collect())
}
