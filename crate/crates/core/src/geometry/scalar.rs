use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

use super::interval::Interval;
use crate::error::GeometryError;

/// Number-like values a plant model can be evaluated over.
///
/// Implemented for `f64` (simulation), [`Interval`] (natural interval
/// extension) and [`Dual`] (forward-mode derivatives over either).
pub trait Scalar:
    Clone + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn scale(&self, k: f64) -> Self;
    fn offset(&self, k: f64) -> Self;
    fn sqr(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Result<Self, GeometryError>;
    fn sqrt(&self) -> Result<Self, GeometryError>;
    fn recip(&self) -> Result<Self, GeometryError>;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn offset(&self, k: f64) -> Self {
        self + k
    }
    fn sqr(&self) -> Self {
        self * self
    }
    fn sin(&self) -> Self {
        libm::sin(*self)
    }
    fn cos(&self) -> Self {
        libm::cos(*self)
    }
    fn tan(&self) -> Result<Self, GeometryError> {
        Ok(libm::tan(*self))
    }
    fn sqrt(&self) -> Result<Self, GeometryError> {
        Ok(libm::sqrt(*self))
    }
    fn recip(&self) -> Result<Self, GeometryError> {
        Ok(1.0 / self)
    }
}

impl Scalar for Interval {
    fn cst(v: f64) -> Self {
        Interval::point(v)
    }
    fn scale(&self, k: f64) -> Self {
        Interval::scale(self, k)
    }
    fn offset(&self, k: f64) -> Self {
        self.add_scalar(k)
    }
    fn sqr(&self) -> Self {
        Interval::sqr(self)
    }
    fn sin(&self) -> Self {
        Interval::sin(self)
    }
    fn cos(&self) -> Self {
        Interval::cos(self)
    }
    fn tan(&self) -> Result<Self, GeometryError> {
        Interval::tan(self)
    }
    fn sqrt(&self) -> Result<Self, GeometryError> {
        Interval::sqrt(self)
    }
    fn recip(&self) -> Result<Self, GeometryError> {
        if self.contains(0.0) {
            return Err(GeometryError::Domain(alloc::format!("reciprocal of {self}")));
        }
        let (a, b) = (1.0 / self.hi(), 1.0 / self.lo());
        Ok(Interval::from_ordered(a.next_down(), b.next_up()))
    }
}

/// Forward-mode dual number: a value and its partial derivatives.
///
/// An empty partial vector denotes a constant; binary operations treat
/// missing trailing partials as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<S> {
    pub value: S,
    pub partials: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    /// Independent variable `index` out of `count`.
    pub fn var(value: S, index: usize, count: usize) -> Self {
        let mut partials = alloc::vec![S::cst(0.0); count];
        partials[index] = S::cst(1.0);
        Self { value, partials }
    }

    pub fn constant(value: S) -> Self {
        Self { value, partials: Vec::new() }
    }

    /// Partial derivative `i`, zero when absent.
    pub fn partial(&self, i: usize) -> S {
        self.partials.get(i).cloned().unwrap_or_else(|| S::cst(0.0))
    }

    fn map_partials(&self, k: &S) -> Vec<S> {
        self.partials.iter().map(|p| p.clone() * k.clone()).collect()
    }
}

fn zip_partials<S: Scalar>(a: &[S], b: &[S], f: impl Fn(&S, &S) -> S, only_a: impl Fn(&S) -> S, only_b: impl Fn(&S) -> S) -> Vec<S> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => f(x, y),
            (Some(x), None) => only_a(x),
            (None, Some(y)) => only_b(y),
            (None, None) => unreachable!(),
        })
        .collect()
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let partials = zip_partials(&self.partials, &rhs.partials, |x, y| x.clone() + y.clone(), S::clone, S::clone);
        Dual { value: self.value + rhs.value, partials }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let partials = zip_partials(&self.partials, &rhs.partials, |x, y| x.clone() - y.clone(), S::clone, |y| -y.clone());
        Dual { value: self.value - rhs.value, partials }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (u, v) = (&self.value, &rhs.value);
        let partials = zip_partials(
            &self.partials,
            &rhs.partials,
            |x, y| x.clone() * v.clone() + u.clone() * y.clone(),
            |x| x.clone() * v.clone(),
            |y| u.clone() * y.clone(),
        );
        Dual { value: self.value * rhs.value, partials }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { value: -self.value, partials: self.partials.into_iter().map(|p| -p).collect() }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn cst(v: f64) -> Self {
        Dual::constant(S::cst(v))
    }
    fn scale(&self, k: f64) -> Self {
        Dual { value: self.value.scale(k), partials: self.partials.iter().map(|p| p.scale(k)).collect() }
    }
    fn offset(&self, k: f64) -> Self {
        Dual { value: self.value.offset(k), partials: self.partials.clone() }
    }
    fn sqr(&self) -> Self {
        let two_v = self.value.scale(2.0);
        Dual { value: self.value.sqr(), partials: self.map_partials(&two_v) }
    }
    fn sin(&self) -> Self {
        Dual { value: self.value.sin(), partials: self.map_partials(&self.value.cos()) }
    }
    fn cos(&self) -> Self {
        Dual { value: self.value.cos(), partials: self.map_partials(&-self.value.sin()) }
    }
    fn tan(&self) -> Result<Self, GeometryError> {
        let t = self.value.tan()?;
        let dt = t.sqr().offset(1.0);
        Ok(Dual { value: t, partials: self.map_partials(&dt) })
    }
    fn sqrt(&self) -> Result<Self, GeometryError> {
        let s = self.value.sqrt()?;
        let ds = s.scale(2.0).recip()?;
        Ok(Dual { value: s, partials: self.map_partials(&ds) })
    }
    fn recip(&self) -> Result<Self, GeometryError> {
        let r = self.value.recip()?;
        let dr = -r.sqr();
        Ok(Dual { value: r, partials: self.map_partials(&dr) })
    }
}
