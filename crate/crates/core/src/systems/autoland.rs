//! Vision-based auto-landing: discrete aircraft kinematics under a PD
//! glide-slope tracker, and a synthetic pose estimator.
//!
//! State `(x, y, z, psi, theta, v)`; the observer reports everything but `v`.

use alloc::vec;
use alloc::vec::Vec;

use super::noise::{hash_quantized, unit_noise};
use super::{corridor, Band};
use crate::error::{GeometryError, SystemError};
use crate::geometry::{HyperRect, Scalar};
use crate::system::{Observer, Plant, Requirement};

pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;
pub const PSI: usize = 3;
pub const THETA: usize = 4;
pub const V: usize = 5;

const OBSERVED: [usize; 5] = [X, Y, Z, PSI, THETA];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoLandParams {
    pub dt: f64,
    /// Reference position at `t = 0`.
    pub start: [f64; 3],
    pub speed: f64,
    /// Descent angle in radians; the reference pitch is its negative.
    pub glide_angle: f64,
}

impl Default for AutoLandParams {
    fn default() -> Self {
        Self { dt: 0.1, start: [-3015.0, 0.0, 120.0], speed: 10.0, glide_angle: 3.0f64.to_radians() }
    }
}

impl AutoLandParams {
    /// Reference starting 2.3 km before touchdown at the origin.
    pub fn touchdown_frame() -> Self {
        Self { start: [-2300.0, 0.0, 120.0], ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoLand {
    params: AutoLandParams,
    touchdown: [f64; 3],
    /// Steps until the reference reaches the ground.
    touchdown_step: f64,
}

impl AutoLand {
    pub fn new(params: AutoLandParams) -> Result<Self, SystemError> {
        if !(params.dt > 0.0) || !(params.speed > 0.0) {
            return Err(SystemError::InvalidParam("dt and speed must be positive".into()));
        }
        if !(params.glide_angle >= 0.0 && params.glide_angle < core::f64::consts::FRAC_PI_2) {
            return Err(SystemError::InvalidParam("glide angle must lie in [0, pi/2)".into()));
        }
        let [x0, y0, z0] = params.start;
        let (touchdown, touchdown_step) = if params.glide_angle > 0.0 && z0 > 0.0 {
            let run = z0 / libm::tan(params.glide_angle);
            let steps = z0 / (params.speed * libm::sin(params.glide_angle) * params.dt);
            ([x0 + run, y0, 0.0], steps)
        } else {
            ([f64::INFINITY, y0, z0], f64::INFINITY)
        };
        Ok(Self { params, touchdown, touchdown_step })
    }

    pub fn params(&self) -> &AutoLandParams {
        &self.params
    }

    pub fn touchdown(&self) -> [f64; 3] {
        self.touchdown
    }

    /// Whole steps before the reference touches down.
    pub fn steps_to_touchdown(&self) -> usize {
        libm::floor(self.touchdown_step) as usize
    }

    pub fn pitch_ref(&self) -> f64 {
        -self.params.glide_angle
    }

    /// The first initial set of the landing study.
    pub fn x01() -> HyperRect {
        HyperRect::from_bounds(&[
            (-3020.0, -3010.0),
            (-5.0, 5.0),
            (118.0, 122.0),
            (-0.001, 0.001),
            (-0.0534, -0.0514),
            (9.99, 10.01),
        ])
        .expect("static box")
    }

    /// The second, wider initial set.
    pub fn x02() -> HyperRect {
        HyperRect::from_bounds(&[
            (-3030.0, -3000.0),
            (-5.0, 5.0),
            (100.0, 140.0),
            (-0.001, 0.001),
            (-0.0534, -0.0514),
            (9.99, 10.01),
        ])
        .expect("static box")
    }

    /// Ambient light by sun angle.
    pub fn env_box() -> HyperRect {
        HyperRect::from_bounds(&[(0.2, 1.2), (-0.1, 0.6)]).expect("static box")
    }

    pub fn nominal_env() -> Vec<f64> {
        vec![1.0, 0.0]
    }

    /// Bounding box of the approach, used as the contract training domain.
    pub fn approach_box(&self) -> HyperRect {
        let [x0, _, z0] = self.params.start;
        let x_end = if self.touchdown[0].is_finite() { self.touchdown[0] } else { x0 + 3000.0 };
        let th = self.pitch_ref();
        HyperRect::from_bounds(&[
            (x0 - 20.0, x_end),
            (-15.0, 15.0),
            (-5.0, z0 + 25.0),
            (-0.25, 0.25),
            (th - 0.06, th + 0.06),
            (self.params.speed - 0.2, self.params.speed + 0.2),
        ])
        .expect("ordered bounds")
    }

    /// Corridor around the reference: `y` and `z` half-widths (and optionally
    /// `x`) interpolated linearly from initial to final over the horizon.
    pub fn requirement(&self, widths: &CorridorWidths, horizon: usize) -> Result<Requirement, SystemError> {
        let mut dims = vec![];
        let mut halves = vec![];
        if let Some(x) = widths.x {
            dims.push(X);
            halves.push(x);
        }
        dims.push(Y);
        halves.push(widths.y);
        dims.push(Z);
        halves.push(widths.z);
        corridor(|t| self.reference(t), &dims, &halves, horizon)
    }
}

/// Initial and final half-widths of the landing corridor.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorridorWidths {
    pub x: Option<(f64, f64)>,
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Default for CorridorWidths {
    fn default() -> Self {
        Self { x: None, y: (10.0, 1.0), z: (5.0, 2.0) }
    }
}

impl Plant for AutoLand {
    fn name(&self) -> &str {
        "autoland"
    }

    fn state_dim(&self) -> usize {
        6
    }

    fn observed_dims(&self) -> &[usize] {
        &OBSERVED
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn reference(&self, t: usize) -> Vec<f64> {
        let p = &self.params;
        let k = (t as f64).min(self.touchdown_step);
        let th = self.pitch_ref();
        let d = p.speed * p.dt * k;
        vec![
            p.start[0] + d * libm::cos(th),
            p.start[1],
            p.start[2] + d * libm::sin(th),
            0.0,
            th,
            p.speed,
        ]
    }

    fn step<S: Scalar>(&self, s: &[S], obs: &[S], t: usize) -> Result<Vec<S>, GeometryError> {
        if s.len() != 6 || obs.len() != 5 {
            return Err(GeometryError::DimensionMismatch { expected: 6, found: s.len() });
        }
        let dt = self.params.dt;
        let r = self.reference(t);
        let (xr, yr, zr, psir, thr, vr) = (r[0], r[1], r[2], r[3], r[4], r[5]);

        let dx = (-obs[X].clone()).offset(xr);
        let dy = (-obs[Y].clone()).offset(yr);
        let (sp, cp) = (obs[PSI].sin(), obs[PSI].cos());
        let xe = cp.clone() * dx.clone() + sp.clone() * dy.clone();
        let ye = cp * dy - sp * dx;
        let ze = (-obs[Z].clone()).offset(zr);
        let psie = (-obs[PSI].clone()).offset(psir);
        let thetae = (-obs[THETA].clone()).offset(thr);
        let v = s[V].clone();

        let gx = xe.scale(0.01).offset(vr * libm::cos(thr) * libm::cos(psir));
        let gz = ze.scale(0.01).offset(vr * libm::sin(thr));
        let a = ((gx.sqr() + gz.sqr()).sqrt()? - v.clone()).scale(0.005);
        let beta = psie.clone() + (ye.scale(0.01) + psie.sin().scale(0.01)).scale(vr);
        let omega = thetae + ze.scale(0.001);

        let (spsi, cpsi) = (s[PSI].sin(), s[PSI].cos());
        let (sth, cth) = (s[THETA].sin(), s[THETA].cos());
        let vdt = v.scale(dt);
        Ok(vec![
            s[X].clone() + vdt.clone() * cpsi * cth.clone(),
            s[Y].clone() + vdt.clone() * spsi * cth,
            s[Z].clone() + vdt * sth,
            s[PSI].clone() + beta.scale(dt),
            s[THETA].clone() + omega.scale(dt),
            s[V].clone() + a.scale(dt),
        ])
    }
}

/// Constants of the synthetic landing observer.
///
/// The error on observed coordinate `j` is
/// `offset_j * d(e) + base_j(s) * (bias_j * d(e) + (1 + noise_gain * d(e)) * w_j(s, e))`,
/// where `base_j` grows with the along-track distance to touchdown, `w_j` is hash
/// noise in `[-1, 1]` and `d(e)` is the degradation of the environment.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoLandObserverParams {
    pub floor: [f64; 5],
    /// Growth of the base amplitude per meter of along-track distance.
    pub slope: [f64; 5],
    pub bias: [f64; 5],
    /// Fixed shift per unit of degradation, independent of distance.
    pub offset: [f64; 5],
    pub noise_gain: f64,
    /// Weight of `|ambient - nominal ambient|`.
    pub ambient_weight: f64,
    /// Ambient level below which degradation grows by `low_slope` per unit.
    pub low_knee: f64,
    pub low_slope: f64,
    pub high_knee: f64,
    pub high_slope: f64,
    pub glare: f64,
    pub glare_band: Band,
    /// Inside this band the low-light term is multiplied by `compensation`.
    pub compensated_band: Band,
    pub compensation: f64,
    pub salt: u64,
}

impl Default for AutoLandObserverParams {
    fn default() -> Self {
        Self {
            floor: [0.05, 0.005, 0.005, 5e-5, 2e-5],
            slope: [1e-4, 1e-5, 1e-5, 1e-7, 5e-8],
            bias: [0.0, 0.3, 0.3, 0.3, 0.3],
            offset: [0.0, 0.6, 0.6, 0.0, 0.0],
            noise_gain: 4.0,
            ambient_weight: 0.2,
            low_knee: 0.6,
            low_slope: 40.0,
            high_knee: 1.15,
            high_slope: 40.0,
            glare: 8.0,
            glare_band: Band { lo: [0.95, 0.25], hi: [1.1, 0.4] },
            compensated_band: Band { lo: [0.4, 0.25], hi: [0.6, 0.4] },
            compensation: 0.0,
            salt: 0x6c61_6e64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoLandObserver {
    pub params: AutoLandObserverParams,
    touchdown_x: f64,
    nominal_ambient: f64,
}

const STATE_QUANTA: [f64; 5] = [0.05, 0.05, 0.05, 1e-5, 1e-5];
const ENV_QUANTA: [f64; 2] = [1e-3, 1e-3];

impl AutoLandObserver {
    pub fn new(params: AutoLandObserverParams, plant: &AutoLand) -> Self {
        Self { params, touchdown_x: plant.touchdown()[0], nominal_ambient: 1.0 }
    }

    /// Degradation `d(e) >= 0`; zero at the nominal environment.
    pub fn degradation(&self, e: &[f64]) -> f64 {
        let p = &self.params;
        let (amb, sun) = (e[0], e[1]);
        let mut low = p.low_slope * (p.low_knee - amb).max(0.0);
        if p.compensated_band.contains(amb, sun) {
            low *= p.compensation;
        }
        let high = p.high_slope * (amb - p.high_knee).max(0.0);
        let glare = if p.glare_band.contains(amb, sun) { p.glare } else { 0.0 };
        p.ambient_weight * libm::fabs(amb - self.nominal_ambient) + low + high + glare
    }

    /// Noise-free error scale of each observed coordinate at state `s`.
    pub fn base(&self, s: &[f64]) -> [f64; 5] {
        let along = if self.touchdown_x.is_finite() { (self.touchdown_x - s[X]).max(0.0) } else { 0.0 };
        let mut b = [0.0; 5];
        for j in 0..5 {
            b[j] = self.params.floor[j] + self.params.slope[j] * along;
        }
        b
    }

    /// Upper bound of `|y_j - s_j|` over all inputs with degradation at most `d_max`.
    pub fn error_bound(&self, s: &[f64], d_max: f64) -> [f64; 5] {
        let base = self.base(s);
        let mut out = [0.0; 5];
        for j in 0..5 {
            out[j] = libm::fabs(self.params.offset[j]) * d_max
                + base[j] * (libm::fabs(self.params.bias[j]) * d_max + 1.0 + self.params.noise_gain * d_max);
        }
        out
    }
}

impl Observer for AutoLandObserver {
    fn observe(&self, s: &[f64], e: &[f64]) -> Vec<f64> {
        let d = self.degradation(e);
        let base = self.base(s);
        let mut key = [0.0; 7];
        key[..5].copy_from_slice(&s[..5]);
        key[5..].copy_from_slice(&e[..2]);
        let mut quanta = [0.0; 7];
        quanta[..5].copy_from_slice(&STATE_QUANTA);
        quanta[5..].copy_from_slice(&ENV_QUANTA);
        (0..5)
            .map(|j| {
                let w = unit_noise(hash_quantized(self.params.salt.wrapping_add(j as u64), &key, &quanta));
                let err = self.params.offset[j] * d + base[j] * (self.params.bias[j] * d + (1.0 + self.params.noise_gain * d) * w);
                s[OBSERVED[j]] + err
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level() -> AutoLand {
        AutoLand::new(AutoLandParams { start: [0.0, 0.0, 0.0], glide_angle: 0.0, ..Default::default() }).unwrap()
    }

    #[test]
    fn on_reference_step_advances_v_dt() {
        let p = level();
        let s = [0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
        let next = p.step(&s, &s[..5], 0).unwrap();
        assert_eq!(next, vec![1.0, 0.0, 0.0, 0.0, 0.0, 10.0]);
    }

    #[test]
    fn control_signs() {
        let p = level();
        // Aircraft to the right of the reference line: yaw left toward it.
        let s = [0.0, -2.0, 0.0, 0.0, 0.0, 10.0];
        let next = p.step(&s, &s[..5], 0).unwrap();
        assert!(next[PSI] > 0.0);
        let slow = [0.0, 0.0, 0.0, 0.0, 0.0, 9.0];
        let next = p.step(&slow, &slow[..5], 0).unwrap();
        assert!(next[V] > 9.0);
    }

    #[test]
    fn reference_follows_glide_slope() {
        let p = AutoLand::new(AutoLandParams::touchdown_frame()).unwrap();
        assert_eq!(p.reference(0)[..3], [-2300.0, 0.0, 120.0]);
        let tan3 = libm::tan(3.0f64.to_radians());
        let mut prev = p.reference(0);
        for t in 1..p.steps_to_touchdown() + 5 {
            let r = p.reference(t);
            assert!(r[Z] <= prev[Z] && r[Z] >= -1e-9);
            if r[X] > prev[X] {
                assert!(((r[Z] - prev[Z]) / (r[X] - prev[X]) + tan3).abs() < 1e-9);
            }
            prev = r;
        }
        assert!(prev[Z].abs() < 1e-9);
    }

    #[test]
    fn observer_is_deterministic_and_nominal_floor_holds() {
        let p = AutoLand::new(AutoLandParams::default()).unwrap();
        let o = AutoLandObserver::new(AutoLandObserverParams::default(), &p);
        let mut s = p.reference(p.steps_to_touchdown());
        s[X] = p.touchdown()[0];
        let y = o.observe(&s, &[1.0, 0.0]);
        assert_eq!(y, o.observe(&s, &[1.0, 0.0]));
        for j in 0..5 {
            assert!((y[j] - s[OBSERVED[j]]).abs() <= o.params.floor[j]);
        }
    }

    #[test]
    fn glare_band_degrades() {
        let p = AutoLand::new(AutoLandParams::default()).unwrap();
        let o = AutoLandObserver::new(AutoLandObserverParams::default(), &p);
        assert_eq!(o.degradation(&[1.0, 0.0]), 0.0);
        assert!(o.degradation(&[1.02, 0.3]) >= o.params.glare);
        assert!(o.degradation(&[0.5, 0.3]) < o.degradation(&[0.5, 0.0]));
    }
}
