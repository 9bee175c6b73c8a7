use alloc::vec::Vec;

use crate::error::GeometryError;
use crate::geometry::{affine_interval_eval, HyperRect, Interval, Scalar};

/// Feature basis over the state used by contract center and radius models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureMap {
    /// Intercept only; the model is a constant.
    Constant,
    /// The raw state coordinates.
    Affine,
    /// Raw coordinates followed by their squares.
    Quadratic,
}

impl FeatureMap {
    pub fn id(&self) -> &'static str {
        match self {
            FeatureMap::Constant => "constant",
            FeatureMap::Affine => "affine",
            FeatureMap::Quadratic => "quadratic",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "constant" => Some(FeatureMap::Constant),
            "affine" => Some(FeatureMap::Affine),
            "quadratic" => Some(FeatureMap::Quadratic),
            _ => None,
        }
    }

    /// Number of features (excluding the intercept) for a state of dimension `n`.
    pub fn len(&self, n: usize) -> usize {
        match self {
            FeatureMap::Constant => 0,
            FeatureMap::Affine => n,
            FeatureMap::Quadratic => 2 * n,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.eval_generic(x)
    }

    pub fn eval_generic<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            FeatureMap::Constant => Vec::new(),
            FeatureMap::Affine => x.to_vec(),
            FeatureMap::Quadratic => x.iter().cloned().chain(x.iter().map(Scalar::sqr)).collect(),
        }
    }

    /// Encloses the range of `intercept + coeffs . features(x)` over the box.
    /// Exact for the affine basis; natural extension for the quadratic one.
    pub fn interval_eval(&self, coeffs: &[f64], intercept: f64, r: &HyperRect) -> Result<Interval, GeometryError> {
        let n = r.dim();
        if coeffs.len() != self.len(n) {
            return Err(GeometryError::DimensionMismatch { expected: self.len(n), found: coeffs.len() });
        }
        match self {
            FeatureMap::Constant => Ok(Interval::point(intercept)),
            FeatureMap::Affine => affine_interval_eval(coeffs, intercept, r),
            FeatureMap::Quadratic => {
                let lin = affine_interval_eval(&coeffs[..n], intercept, r)?;
                let mut acc = lin;
                for (c, iv) in coeffs[n..].iter().zip(r.intervals()) {
                    acc = acc + iv.sqr().scale(*c);
                }
                Ok(acc)
            }
        }
    }
}

/// `intercept + coeffs . features(x)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearModel {
    pub coeffs: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn constant(n_features: usize, c: f64) -> Self {
        Self { coeffs: alloc::vec![0.0; n_features], intercept: c }
    }

    pub fn eval_features(&self, phi: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(phi).map(|(c, p)| c * p).sum::<f64>()
    }

    pub fn eval_generic<S: Scalar>(&self, phi: &[S]) -> S {
        let mut acc = S::cst(self.intercept);
        for (c, p) in self.coeffs.iter().zip(phi) {
            if *c != 0.0 {
                acc = acc + p.scale(*c);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interval_eval_encloses_samples() {
        let r = HyperRect::from_bounds(&[(-1.0, 2.0), (0.5, 1.5)]).unwrap();
        let coeffs = [0.3, -1.2, 0.7, -0.4];
        let iv = FeatureMap::Quadratic.interval_eval(&coeffs, 0.25, &r).unwrap();
        let m = LinearModel { coeffs: coeffs.to_vec(), intercept: 0.25 };
        for i in 0..=20 {
            for j in 0..=20 {
                let x = [-1.0 + 3.0 * i as f64 / 20.0, 0.5 + j as f64 / 20.0];
                let v = m.eval_features(&FeatureMap::Quadratic.eval(&x));
                assert!(iv.contains(v));
            }
        }
    }

    #[test]
    fn ids_round_trip() {
        for f in [FeatureMap::Constant, FeatureMap::Affine, FeatureMap::Quadratic] {
            assert_eq!(FeatureMap::from_id(f.id()), Some(f));
        }
        assert_eq!(FeatureMap::Affine.len(6), 6);
        assert_eq!(FeatureMap::Quadratic.len(6), 12);
    }
}
