//! Closed real intervals with outward-rounded arithmetic.
//!
//! Every operation that can round widens its result by one unit in the last
//! place on each side, so the returned interval always encloses the exact
//! image of its operands. Transcendental functions are widened by two ulps
//! because the underlying `libm` routines are faithful, not correctly rounded.

use core::f64::consts::{FRAC_PI_2, PI, TAU};
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use alloc::format;

use crate::error::GeometryError;

/// Slack used when deciding whether a critical point or pole of a
/// trigonometric function falls inside an interval. Erring on the inclusive
/// side only loosens the enclosure.
const CRITICAL_SLACK: f64 = 1e-12;

#[inline]
fn down(x: f64) -> f64 {
    x.next_down()
}

#[inline]
fn up(x: f64) -> f64 {
    x.next_up()
}

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// The binary operations accepted by [`interval_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Unary; the second operand is ignored.
    Neg,
    /// Multiplication by the second operand (normally a real).
    Scale,
    /// Unary; the second operand is ignored.
    Abs,
}

/// The unary operations accepted by [`interval_trig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigFn {
    Sin,
    Cos,
    Tan,
}

impl Interval {
    /// Builds `[lo, hi]`, rejecting NaN endpoints and `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(GeometryError::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval `[v, v]`.
    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Symmetric interval `[c - r, c + r]` (outward rounded).
    pub fn centered(c: f64, r: f64) -> Self {
        let r = r.abs();
        Self { lo: down(c - r), hi: up(c + r) }
    }

    /// Builds an interval from endpoints that are known to be ordered.
    pub(crate) fn from_ordered(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "{lo} > {hi}");
        Self { lo, hi }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Half-width, rounded up.
    pub fn rad(&self) -> f64 {
        up(0.5 * (self.hi - self.lo))
    }

    /// Largest absolute value attained.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Closed-set overlap test; touching endpoints count as overlap.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Widens both endpoints by `by >= 0`.
    pub fn inflate(&self, by: f64) -> Interval {
        let by = by.abs();
        Interval { lo: down(self.lo - by), hi: up(self.hi + by) }
    }

    /// Clamps `v` into the interval.
    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn scale(&self, k: f64) -> Interval {
        let (a, b) = (self.lo * k, self.hi * k);
        Interval { lo: down(a.min(b)), hi: up(a.max(b)) }
    }

    pub fn add_scalar(&self, k: f64) -> Interval {
        Interval { lo: down(self.lo + k), hi: up(self.hi + k) }
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            Interval { lo: -self.hi, hi: -self.lo }
        } else {
            Interval { lo: 0.0, hi: self.mag() }
        }
    }

    /// `x*x`, tighter than `self * self` when the interval straddles zero.
    pub fn sqr(&self) -> Interval {
        let a = self.abs();
        Interval { lo: down(a.lo * a.lo).max(0.0), hi: up(a.hi * a.hi) }
    }

    pub fn sqrt(&self) -> Result<Interval, GeometryError> {
        if self.hi < 0.0 {
            return Err(GeometryError::Domain(format!("sqrt of negative interval {self}")));
        }
        let lo = self.lo.max(0.0);
        Ok(Interval { lo: down(libm::sqrt(lo)).max(0.0), hi: up(libm::sqrt(self.hi)) })
    }

    pub fn sin(&self) -> Interval {
        // Maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi.
        self.periodic_range(libm::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(&self) -> Interval {
        // Maxima at 2k pi, minima at pi + 2k pi.
        self.periodic_range(libm::cos, 0.0, PI)
    }

    /// Range of a 2pi-periodic function bounded by [-1, 1] whose maxima sit at
    /// `max_at + 2k pi` and minima at `min_at + 2k pi`.
    fn periodic_range(&self, f: fn(f64) -> f64, max_at: f64, min_at: f64) -> Interval {
        if !(self.width() < TAU) {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let fa = f(self.lo);
        let fb = f(self.hi);
        let mut lo = fa.min(fb);
        let mut hi = fa.max(fb);
        if self.hits_lattice(max_at, TAU) {
            hi = 1.0;
        }
        if self.hits_lattice(min_at, TAU) {
            lo = -1.0;
        }
        Interval { lo: down(down(lo)).max(-1.0), hi: up(up(hi)).min(1.0) }
    }

    /// True when some `offset + k * period` lies within the interval
    /// (inflated by [`CRITICAL_SLACK`]).
    fn hits_lattice(&self, offset: f64, period: f64) -> bool {
        let k = libm::ceil((self.lo - CRITICAL_SLACK - offset) / period);
        offset + k * period <= self.hi + CRITICAL_SLACK
    }

    /// Monotone enclosure of `tan`; fails when the interval reaches a pole.
    pub fn tan(&self) -> Result<Interval, GeometryError> {
        if !(self.width() < PI) || self.hits_lattice(FRAC_PI_2, PI) {
            return Err(GeometryError::Domain(format!("tan interval {self} spans a pole")));
        }
        Ok(Interval { lo: down(down(libm::tan(self.lo))), hi: up(up(libm::tan(self.hi))) })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: down(self.lo + rhs.lo), hi: up(self.hi + rhs.hi) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: down(self.lo - rhs.hi), hi: up(self.hi - rhs.lo) }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        let mut lo = p[0];
        let mut hi = p[0];
        for &v in &p[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Interval { lo: down(lo), hi: up(hi) }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

/// Second operand of [`interval_arith`]: another interval or a plain real.
#[derive(Clone, Copy, Debug)]
pub enum Operand {
    Interval(Interval),
    Real(f64),
}

impl From<Interval> for Operand {
    fn from(v: Interval) -> Self {
        Operand::Interval(v)
    }
}

impl From<f64> for Operand {
    fn from(v: f64) -> Self {
        Operand::Real(v)
    }
}

/// Interval arithmetic dispatch; a real operand is treated as a point interval.
pub fn interval_arith(op: ArithOp, a: Interval, b: impl Into<Operand>) -> Interval {
    let b = b.into();
    let bi = match b {
        Operand::Interval(iv) => iv,
        Operand::Real(v) => Interval::point(v),
    };
    match op {
        ArithOp::Add => a + bi,
        ArithOp::Sub => a - bi,
        ArithOp::Mul => a * bi,
        ArithOp::Neg => -a,
        ArithOp::Scale => match b {
            Operand::Real(k) => a.scale(k),
            Operand::Interval(k) => a * k,
        },
        ArithOp::Abs => a.abs(),
    }
}

pub fn interval_trig(f: TrigFn, a: Interval) -> Result<Interval, GeometryError> {
    match f {
        TrigFn::Sin => Ok(a.sin()),
        TrigFn::Cos => Ok(a.cos()),
        TrigFn::Tan => a.tan(),
    }
}
