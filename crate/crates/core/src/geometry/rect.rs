use alloc::vec::Vec;
use core::fmt;

use super::interval::Interval;
use crate::error::GeometryError;

/// Axis-aligned box over `R^n`, `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperRect {
    dims: Vec<Interval>,
}

impl HyperRect {
    pub fn new(dims: Vec<Interval>) -> Result<Self, GeometryError> {
        if dims.is_empty() {
            return Err(GeometryError::Empty);
        }
        for iv in &dims {
            if !iv.width().is_finite() {
                return Err(GeometryError::InvalidInterval { lo: iv.lo(), hi: iv.hi() });
            }
        }
        Ok(Self { dims })
    }

    /// Builds a box from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, GeometryError> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }

    /// Degenerate box at a point.
    pub fn point(p: &[f64]) -> Result<Self, GeometryError> {
        Self::new(p.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.dims
    }

    pub fn into_intervals(self) -> Vec<Interval> {
        self.dims
    }

    pub fn axis(&self, i: usize) -> Interval {
        self.dims[i]
    }

    pub fn lo(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::hi).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    /// Product of widths.
    pub fn volume(&self) -> f64 {
        self.dims.iter().map(Interval::width).product()
    }

    fn check_dim(&self, found: usize) -> Result<(), GeometryError> {
        if found != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }

    /// Splits at the midpoint of `axis`. The halves share the cut face.
    pub fn bisect(&self, axis: usize) -> Result<(HyperRect, HyperRect), GeometryError> {
        if axis >= self.dim() {
            return Err(GeometryError::AxisOutOfRange { axis, dim: self.dim() });
        }
        let iv = self.dims[axis];
        let mid = iv.mid();
        let mut left = self.dims.clone();
        let mut right = self.dims.clone();
        left[axis] = Interval::from_ordered(iv.lo(), mid);
        right[axis] = Interval::from_ordered(mid, iv.hi());
        Ok((HyperRect { dims: left }, HyperRect { dims: right }))
    }

    /// Inclusive point membership.
    pub fn contains_point(&self, p: &[f64]) -> Result<bool, GeometryError> {
        self.check_dim(p.len())?;
        Ok(self.dims.iter().zip(p).all(|(iv, &v)| iv.contains(v)))
    }

    pub fn contains_rect(&self, other: &HyperRect) -> Result<bool, GeometryError> {
        self.check_dim(other.dim())?;
        Ok(self.dims.iter().zip(&other.dims).all(|(a, b)| a.contains_interval(b)))
    }

    /// Closed-set overlap; boxes sharing only a face intersect.
    pub fn intersects(&self, other: &HyperRect) -> Result<bool, GeometryError> {
        self.check_dim(other.dim())?;
        Ok(self.dims.iter().zip(&other.dims).all(|(a, b)| a.intersects(b)))
    }

    pub fn intersection(&self, other: &HyperRect) -> Result<Option<HyperRect>, GeometryError> {
        self.check_dim(other.dim())?;
        let mut dims = Vec::with_capacity(self.dim());
        for (a, b) in self.dims.iter().zip(&other.dims) {
            match a.intersection(b) {
                Some(iv) => dims.push(iv),
                None => return Ok(None),
            }
        }
        Ok(Some(HyperRect { dims }))
    }

    pub fn hull(&self, other: &HyperRect) -> Result<HyperRect, GeometryError> {
        self.check_dim(other.dim())?;
        Ok(HyperRect { dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect() })
    }

    /// Restriction to the listed axes, in the listed order.
    pub fn project(&self, axes: &[usize]) -> Result<HyperRect, GeometryError> {
        let mut dims = Vec::with_capacity(axes.len());
        for &a in axes {
            if a >= self.dim() {
                return Err(GeometryError::AxisOutOfRange { axis: a, dim: self.dim() });
            }
            dims.push(self.dims[a]);
        }
        HyperRect::new(dims)
    }

    /// Maps a point of the unit cube `[0,1]^n` into the box.
    pub fn lerp(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(iv, &t)| iv.lo() + t * iv.width()).collect()
    }

    /// Clamps a point componentwise into the box.
    pub fn clamp_point(&self, p: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(p).map(|(iv, &v)| iv.clamp(v)).collect()
    }
}

impl fmt::Display for HyperRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// Exact range of `intercept + coeffs . x` over `x` in `r`.
///
/// Each term picks the endpoint matching the coefficient's sign; the sum is
/// accumulated in interval arithmetic so rounding stays outward.
pub fn affine_interval_eval(coeffs: &[f64], intercept: f64, r: &HyperRect) -> Result<Interval, GeometryError> {
    r.check_dim(coeffs.len())?;
    let mut acc = Interval::point(intercept);
    for (&c, iv) in coeffs.iter().zip(r.intervals()) {
        if c == 0.0 {
            continue;
        }
        acc = acc + iv.scale(c);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(b: &[(f64, f64)]) -> HyperRect {
        HyperRect::from_bounds(b).unwrap()
    }

    #[test]
    fn bisect_examples() {
        let (a, b) = rect(&[(0.0, 2.0), (0.0, 1.0)]).bisect(0).unwrap();
        assert_eq!(a, rect(&[(0.0, 1.0), (0.0, 1.0)]));
        assert_eq!(b, rect(&[(1.0, 2.0), (0.0, 1.0)]));
        let (a, b) = rect(&[(0.0, 0.0), (0.0, 4.0)]).bisect(1).unwrap();
        assert_eq!(a, rect(&[(0.0, 0.0), (0.0, 2.0)]));
        assert_eq!(b, rect(&[(0.0, 0.0), (2.0, 4.0)]));
        assert!(rect(&[(0.0, 1.0)]).bisect(1).is_err());
    }

    #[test]
    fn widest_axis_bisection_shrinks_geometrically() {
        let mut r = rect(&[(0.0, 3.0), (0.0, 1.0), (-2.0, 2.0)]);
        let w0 = r.max_width();
        let n = r.dim();
        for k in 1..=30usize {
            let widths = r.widths();
            let axis = (0..n).fold(0, |best, i| if widths[i] > widths[best] { i } else { best });
            r = r.bisect(axis).unwrap().0;
            let bound = w0 * libm::pow(2.0, -((k / n) as f64));
            assert!(r.max_width() <= bound + 1e-12, "k={k}: {} > {bound}", r.max_width());
        }
    }

    #[test]
    fn contains_examples() {
        let unit = rect(&[(0.0, 1.0), (0.0, 1.0)]);
        assert!(unit.contains_point(&[0.5, 1.0]).unwrap());
        assert!(!unit.contains_point(&[1.1, 0.5]).unwrap());
        assert!(unit.contains_rect(&rect(&[(0.2, 0.8), (0.2, 0.8)])).unwrap());
        assert!(matches!(unit.contains_point(&[0.5]), Err(GeometryError::DimensionMismatch { .. })));
    }

    #[test]
    fn intersects_examples() {
        assert!(rect(&[(0.0, 1.0)]).intersects(&rect(&[(1.0, 2.0)])).unwrap());
        assert!(!rect(&[(0.0, 1.0)]).intersects(&rect(&[(1.01, 2.0)])).unwrap());
        assert!(!rect(&[(0.0, 1.0), (0.0, 1.0)])
            .intersects(&rect(&[(0.5, 2.0), (2.0, 3.0)]))
            .unwrap());
        assert!(rect(&[(0.0, 1.0)]).intersects(&rect(&[(0.0, 1.0), (0.0, 1.0)])).is_err());
    }

    #[test]
    fn affine_eval_examples() {
        let iv = affine_interval_eval(&[1.0, 0.0], 0.0, &rect(&[(0.0, 1.0), (5.0, 9.0)])).unwrap();
        assert!(iv.contains(0.0) && iv.contains(1.0) && iv.width() < 1.0 + 1e-12);
        // 3 + 2*[0,1] - [0,2] = [1, 5]
        let iv = affine_interval_eval(&[2.0, -1.0], 3.0, &rect(&[(0.0, 1.0), (0.0, 2.0)])).unwrap();
        assert!(iv.contains(1.0) && iv.contains(5.0) && iv.width() < 4.0 + 1e-12);
        let iv = affine_interval_eval(&[0.0, 0.0], 7.5, &rect(&[(-3.0, 1.0), (0.0, 2.0)])).unwrap();
        assert_eq!(iv, Interval::point(7.5));
        assert!(affine_interval_eval(&[1.0], 0.0, &rect(&[(0.0, 1.0), (0.0, 1.0)])).is_err());
    }

    #[test]
    fn project_and_lerp() {
        let r = rect(&[(0.0, 1.0), (10.0, 20.0), (-1.0, 1.0)]);
        assert_eq!(r.project(&[2, 0]).unwrap(), rect(&[(-1.0, 1.0), (0.0, 1.0)]));
        assert_eq!(r.lerp(&[0.5, 0.0, 1.0]), alloc::vec![0.5, 10.0, 1.0]);
    }
}
