//! Vision-based drone racing: twelve-state quadrotor model under a linear
//! tracking law, a gate-threading reference path, and a synthetic pose
//! estimator.
//!
//! State `(x, y, z, vx, vy, vz, phi, theta, psi, rho, omega, beta)`; the
//! observer reports `(x, y, z, psi)`.

use alloc::vec;
use alloc::vec::Vec;

use super::corridor;
use super::noise::{hash_quantized, unit_noise};
use crate::error::{GeometryError, SystemError};
use crate::geometry::{HyperRect, Scalar};
use crate::system::{Observer, Plant, Requirement};

pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;
pub const VX: usize = 3;
pub const VY: usize = 4;
pub const VZ: usize = 5;
pub const PHI: usize = 6;
pub const THETA: usize = 7;
pub const PSI: usize = 8;
pub const RHO: usize = 9;
pub const OMEGA: usize = 10;
pub const BETA: usize = 11;

const OBSERVED: [usize; 4] = [X, Y, Z, PSI];

pub const G: f64 = 9.81;
pub const D0: f64 = 10.0;
pub const D1: f64 = 8.0;
pub const N0: f64 = 10.0;
pub const KT: f64 = 0.91;

/// Rows of the tracking gain over `(x, vx, phi, rho, y, vy, theta, omega, z, vz)` errors.
pub const GAIN: [[f64; 10]; 3] = [
    [3.16, 4.52, 4.25, 1.36, 0.0, -0.0, -0.0, 0.0, -0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 1.83, 1.46, 1.14, -0.0, -0.0],
    [0.0, 0.0, -0.0, 0.0, 0.0, -0.0, -0.0, -0.0, 1.0, 1.79],
];

/// Control inputs `(ax, ay, F, az)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DroneInput<S> {
    pub ax: S,
    pub ay: S,
    pub thrust: S,
    pub az: S,
}

/// Right-hand side of the quadrotor model.
pub fn derivative<S: Scalar>(s: &[S], u: &DroneInput<S>) -> Result<Vec<S>, GeometryError> {
    let (sp, cp) = (s[PSI].sin(), s[PSI].cos());
    Ok(vec![
        s[VX].clone() * cp.clone() - s[VY].clone() * sp.clone(),
        s[VX].clone() * sp + s[VY].clone() * cp,
        s[VZ].clone(),
        s[PHI].tan()?.scale(G),
        s[THETA].tan()?.scale(G),
        u.thrust.scale(KT).offset(-G),
        s[RHO].clone() - s[PHI].scale(D1),
        s[OMEGA].clone() - s[THETA].scale(D1),
        s[BETA].clone(),
        u.ax.scale(N0) - s[PHI].scale(D0),
        u.ay.scale(N0) - s[THETA].scale(D0),
        u.az.scale(N0),
    ])
}

/// The tracking law. Position and yaw come from `est`, which holds the
/// estimated pose in the observed coordinates and true values elsewhere.
///
/// The thrust channel is the vertical acceleration command; gravity is fed
/// forward so that a zero error gives hover thrust `g / kT`.
pub fn controller<S: Scalar>(est: &[S], r: &[f64]) -> DroneInput<S> {
    let dx = (-est[X].clone()).offset(r[X]);
    let dy = (-est[Y].clone()).offset(r[Y]);
    let (sp, cp) = (est[PSI].sin(), est[PSI].cos());
    let err = [
        cp.clone() * dx.clone() + sp.clone() * dy.clone(),
        (-est[VX].clone()).offset(r[VX]),
        (-est[PHI].clone()).offset(r[PHI]),
        (-est[RHO].clone()).offset(r[RHO]),
        cp * dy - sp * dx,
        (-est[VY].clone()).offset(r[VY]),
        (-est[THETA].clone()).offset(r[THETA]),
        (-est[OMEGA].clone()).offset(r[OMEGA]),
        (-est[Z].clone()).offset(r[Z]),
        (-est[VZ].clone()).offset(r[VZ]),
    ];
    let row = |k: usize| {
        let mut acc = S::cst(0.0);
        for (g, e) in GAIN[k].iter().zip(&err) {
            if *g != 0.0 {
                acc = acc + e.scale(*g);
            }
        }
        acc
    };
    let psie = (-est[PSI].clone()).offset(r[PSI]);
    let betae = (-est[BETA].clone()).offset(r[BETA]);
    DroneInput { ax: row(0), ay: row(1), thrust: row(2).offset(G).scale(1.0 / KT), az: psie + betae }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DroneParams {
    /// Control period.
    pub dt: f64,
    /// Integration step; must divide `dt`.
    pub substep: f64,
    pub speed: f64,
    /// Time to accelerate the reference from rest to `speed`.
    pub ramp_time: f64,
    pub start: [f64; 3],
    pub start_heading: f64,
    pub gates: Vec<[f64; 3]>,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            substep: 0.01,
            speed: 0.8,
            ramp_time: 1.0,
            start: [-0.84, -0.05, -0.33],
            start_heading: 0.61,
            gates: vec![[0.60, 0.95, -0.20], [2.00, 1.60, -0.05], [3.20, 1.40, -0.15]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct PathPoint {
    s: f64,
    pos: [f64; 3],
    /// Unwrapped heading of the horizontal tangent.
    heading: f64,
    /// Horizontal and vertical components of the unit tangent.
    horiz: f64,
    vert: f64,
    /// Heading change per meter of arc.
    turn: f64,
}

/// Arc-length parametrized cubic Hermite curve through the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GatePath {
    nodes: Vec<[f64; 3]>,
    table: Vec<PathPoint>,
}

const SAMPLES_PER_SEGMENT: usize = 400;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    libm::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

impl GatePath {
    pub fn new(start: [f64; 3], heading: f64, gates: &[[f64; 3]]) -> Result<Self, SystemError> {
        if gates.is_empty() {
            return Err(SystemError::InvalidParam("the gate list is empty".into()));
        }
        let mut nodes = vec![start];
        nodes.extend_from_slice(gates);
        let k = nodes.len();
        let mut tangents = Vec::with_capacity(k);
        for i in 0..k {
            let t = if i == 0 {
                let len = norm(sub(nodes[1], nodes[0]));
                [len * libm::cos(heading), len * libm::sin(heading), nodes[1][2] - nodes[0][2]]
            } else if i == k - 1 {
                sub(nodes[i], nodes[i - 1])
            } else {
                let d = sub(nodes[i + 1], nodes[i - 1]);
                [0.5 * d[0], 0.5 * d[1], 0.5 * d[2]]
            };
            tangents.push(t);
        }
        let mut raw: Vec<([f64; 3], [f64; 3])> = Vec::new();
        for seg in 0..k - 1 {
            let (p0, p1, m0, m1) = (nodes[seg], nodes[seg + 1], tangents[seg], tangents[seg + 1]);
            let first = if seg == 0 { 0 } else { 1 };
            for q in first..=SAMPLES_PER_SEGMENT {
                let u = q as f64 / SAMPLES_PER_SEGMENT as f64;
                let (u2, u3) = (u * u, u * u * u);
                let h = [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2];
                let dh = [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u];
                let mut p = [0.0; 3];
                let mut d = [0.0; 3];
                for c in 0..3 {
                    p[c] = h[0] * p0[c] + h[1] * m0[c] + h[2] * p1[c] + h[3] * m1[c];
                    d[c] = dh[0] * p0[c] + dh[1] * m0[c] + dh[2] * p1[c] + dh[3] * m1[c];
                }
                raw.push((p, d));
            }
        }
        let mut table: Vec<PathPoint> = Vec::with_capacity(raw.len());
        for (i, (p, d)) in raw.iter().enumerate() {
            let s = if i == 0 { 0.0 } else { table[i - 1].s + norm(sub(*p, raw[i - 1].0)) };
            let len = norm(*d).max(1e-12);
            let hz = libm::sqrt(d[0] * d[0] + d[1] * d[1]);
            let mut h = libm::atan2(d[1], d[0]);
            if let Some(prev) = table.last() {
                while h - prev.heading > core::f64::consts::PI {
                    h -= core::f64::consts::TAU;
                }
                while h - prev.heading < -core::f64::consts::PI {
                    h += core::f64::consts::TAU;
                }
            }
            table.push(PathPoint { s, pos: *p, heading: h, horiz: hz / len, vert: d[2] / len, turn: 0.0 });
        }
        for i in 0..table.len() {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(table.len() - 1));
            let ds = table[b].s - table[a].s;
            table[i].turn = if ds > 0.0 { (table[b].heading - table[a].heading) / ds } else { 0.0 };
        }
        Ok(Self { nodes, table })
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        self.table.last().map_or(0.0, |p| p.s)
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let i = self.table.partition_point(|p| p.s <= s).clamp(1, self.table.len() - 1);
        let (a, b) = (&self.table[i - 1], &self.table[i]);
        let u = if b.s > a.s { (s - a.s) / (b.s - a.s) } else { 0.0 };
        (i - 1, u)
    }

    fn lerp(&self, s: f64, f: impl Fn(&PathPoint) -> f64) -> f64 {
        let (i, u) = self.locate(s);
        let (a, b) = (&self.table[i], &self.table[i + 1]);
        f(a) + u * (f(b) - f(a))
    }

    pub fn position(&self, s: f64) -> [f64; 3] {
        [self.lerp(s, |p| p.pos[0]), self.lerp(s, |p| p.pos[1]), self.lerp(s, |p| p.pos[2])]
    }

    pub fn heading(&self, s: f64) -> f64 {
        self.lerp(s, |p| p.heading)
    }

    /// Absolute heading change per meter at the table point nearest to `p`.
    pub fn turn_rate_near(&self, p: &[f64]) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for q in &self.table {
            let d = norm(sub(q.pos, [p[0], p[1], p[2]]));
            if d < best.0 {
                best = (d, q.turn);
            }
        }
        libm::fabs(best.1)
    }

    /// Largest absolute heading change per meter along the path.
    pub fn max_turn_rate(&self) -> f64 {
        self.table.iter().map(|p| libm::fabs(p.turn)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroneRace {
    params: DroneParams,
    path: GatePath,
    substeps: usize,
}

impl DroneRace {
    pub fn new(params: DroneParams) -> Result<Self, SystemError> {
        if !(params.dt > 0.0 && params.substep > 0.0 && params.speed > 0.0 && params.ramp_time >= 0.0) {
            return Err(SystemError::InvalidParam("dt, substep and speed must be positive".into()));
        }
        let ratio = params.dt / params.substep;
        let substeps = libm::round(ratio) as usize;
        if substeps == 0 || libm::fabs(ratio - substeps as f64) > 1e-9 {
            return Err(SystemError::InvalidParam("substep must divide dt".into()));
        }
        let path = GatePath::new(params.start, params.start_heading, &params.gates)?;
        Ok(Self { params, path, substeps })
    }

    pub fn params(&self) -> &DroneParams {
        &self.params
    }

    pub fn path(&self) -> &GatePath {
        &self.path
    }

    /// Reference arc length and speed at time `time`.
    fn progress(&self, time: f64) -> (f64, f64) {
        let (v, tr) = (self.params.speed, self.params.ramp_time);
        let (s, sp) = if time < tr { (0.5 * v * time * time / tr, v * time / tr) } else { (v * (time - 0.5 * tr), v) };
        if s >= self.path.length() {
            (self.path.length(), 0.0)
        } else {
            (s, sp)
        }
    }

    /// Steps until the reference reaches the last gate.
    pub fn steps_to_finish(&self) -> usize {
        let (v, tr) = (self.params.speed, self.params.ramp_time);
        let time = self.path.length() / v + 0.5 * tr;
        libm::floor(time / self.params.dt) as usize
    }

    /// The approach zone of the racing study; unlisted coordinates are zero.
    pub fn initial_set() -> HyperRect {
        let mut b = vec![(0.0, 0.0); 12];
        b[X] = (-0.85, -0.83);
        b[Y] = (-0.06, -0.04);
        b[Z] = (-0.34, -0.32);
        b[PHI] = (-0.01, 0.01);
        b[THETA] = (-0.01, 0.01);
        b[PSI] = (0.60, 0.62);
        HyperRect::from_bounds(&b).expect("static box")
    }

    /// Fog by ambient light.
    pub fn env_box() -> HyperRect {
        HyperRect::from_bounds(&[(0.0, 1.0), (-1.0, 0.0)]).expect("static box")
    }

    pub fn nominal_env() -> Vec<f64> {
        vec![0.0, 0.0]
    }

    /// Default perturbation radii of the along-reference training sampler.
    pub fn tube_radius() -> Vec<f64> {
        vec![0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.05, 0.05, 0.15, 0.3, 0.3, 0.3]
    }

    /// The reference states at every step up to `horizon`.
    pub fn reference_states(&self, horizon: usize) -> Vec<Vec<f64>> {
        (0..=horizon).map(|t| self.reference(t)).collect()
    }

    /// Bounding box of the reference inflated by `radius`.
    pub fn training_box(&self, horizon: usize, radius: &[f64]) -> HyperRect {
        let refs = self.reference_states(horizon);
        let mut b: Vec<(f64, f64)> = (0..12).map(|i| (refs[0][i] - radius[i], refs[0][i] + radius[i])).collect();
        for r in &refs {
            for i in 0..12 {
                b[i].0 = b[i].0.min(r[i] - radius[i]);
                b[i].1 = b[i].1.max(r[i] + radius[i]);
            }
        }
        HyperRect::from_bounds(&b).expect("ordered bounds")
    }

    /// Tube of half-width `half_width` around the reference position.
    pub fn requirement(&self, half_width: f64, horizon: usize) -> Result<Requirement, SystemError> {
        let h = (half_width, half_width);
        corridor(|t| self.reference(t), &[X, Y, Z], &[h, h, h], horizon)
    }

    fn rk4<S: Scalar>(&self, s: &[S], u: &DroneInput<S>, h: f64) -> Result<Vec<S>, GeometryError> {
        let axpy = |x: &[S], k: &[S], a: f64| -> Vec<S> { x.iter().zip(k).map(|(x, k)| x.clone() + k.scale(a)).collect() };
        let k1 = derivative(s, u)?;
        let k2 = derivative(&axpy(s, &k1, 0.5 * h), u)?;
        let k3 = derivative(&axpy(s, &k2, 0.5 * h), u)?;
        let k4 = derivative(&axpy(s, &k3, h), u)?;
        Ok((0..s.len())
            .map(|i| {
                let incr = k1[i].clone() + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i].clone();
                s[i].clone() + incr.scale(h / 6.0)
            })
            .collect())
    }
}

impl Plant for DroneRace {
    fn name(&self) -> &str {
        "dronerace"
    }

    fn state_dim(&self) -> usize {
        12
    }

    fn observed_dims(&self) -> &[usize] {
        &OBSERVED
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn reference(&self, t: usize) -> Vec<f64> {
        let (s, v) = self.progress(t as f64 * self.params.dt);
        let (i, u) = self.path.locate(s);
        let (a, b) = (&self.path.table[i], &self.path.table[i + 1]);
        let horiz = a.horiz + u * (b.horiz - a.horiz);
        let vert = a.vert + u * (b.vert - a.vert);
        let turn = a.turn + u * (b.turn - a.turn);
        let p = self.path.position(s);
        let mut r = vec![0.0; 12];
        r[X] = p[0];
        r[Y] = p[1];
        r[Z] = p[2];
        r[VX] = v * horiz;
        r[VZ] = v * vert;
        r[PSI] = self.path.heading(s);
        r[BETA] = v * turn;
        r
    }

    /// Holds the control computed from the observation over `dt` and
    /// integrates with fixed-step fourth-order Runge-Kutta.
    fn step<S: Scalar>(&self, s: &[S], obs: &[S], t: usize) -> Result<Vec<S>, GeometryError> {
        if s.len() != 12 || obs.len() != 4 {
            return Err(GeometryError::DimensionMismatch { expected: 12, found: s.len() });
        }
        let mut est = s.to_vec();
        for (k, &i) in OBSERVED.iter().enumerate() {
            est[i] = obs[k].clone();
        }
        let u = controller(&est, &self.reference(t));
        let mut x = s.to_vec();
        for _ in 0..self.substeps {
            x = self.rk4(&x, &u, self.params.substep)?;
        }
        Ok(x)
    }
}

/// Constants of the synthetic racing observer.
///
/// The error on observed coordinate `j` is
/// `scale(s) * (floor_j * (1 + noise_gain * x) * w_j + bias_j * x * u_j(e))`
/// with `x = max(0, d(e) - knee)`,
/// with `scale(s) = 1 + turn_gain * turn(s)` growing with the path turn rate
/// near the drone, `w_j` hash noise, `u_j(e)` a fixed unit direction per
/// environment and `d(e) = fog_weight * fog + light_weight * |light| +
/// radial_weight * r^2` where `r` is the normalized distance from `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DroneObserverParams {
    pub floor: [f64; 4],
    pub bias: [f64; 4],
    pub noise_gain: f64,
    pub turn_gain: f64,
    pub fog_weight: f64,
    pub light_weight: f64,
    pub radial_weight: f64,
    pub knee: f64,
    pub salt: u64,
}

impl Default for DroneObserverParams {
    fn default() -> Self {
        Self {
            floor: [0.01, 0.01, 0.01, 0.005],
            bias: [0.6, 0.6, 0.6, 0.0],
            noise_gain: 1.0,
            turn_gain: 0.5,
            fog_weight: 1.0,
            light_weight: 1.0,
            radial_weight: 8.0,
            knee: 3.0,
            salt: 0x6472_6f6e,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroneObserver {
    pub params: DroneObserverParams,
    path: GatePath,
}

const STATE_QUANTA: [f64; 4] = [1e-3, 1e-3, 1e-3, 1e-4];
const ENV_QUANTA: [f64; 2] = [1e-3, 1e-3];

impl DroneObserver {
    pub fn new(params: DroneObserverParams, plant: &DroneRace) -> Self {
        Self { params, path: plant.path.clone() }
    }

    pub fn degradation(&self, e: &[f64]) -> f64 {
        let p = &self.params;
        let (fog, light) = (e[0].max(0.0), libm::fabs(e[1]));
        p.fog_weight * fog + p.light_weight * light + p.radial_weight * (fog * fog + light * light)
    }

    /// Part of the degradation past the knee; errors grow only with this.
    pub fn excess(&self, d: f64) -> f64 {
        (d - self.params.knee).max(0.0)
    }

    /// Multiplier on all errors from the turn rate near `s`.
    pub fn turn_scale(&self, s: &[f64]) -> f64 {
        1.0 + self.params.turn_gain * self.path.turn_rate_near(&s[..3])
    }

    fn bias_direction(&self, e: &[f64], j: usize) -> f64 {
        unit_noise(hash_quantized(self.params.salt ^ 0xb1a5 ^ (j as u64) << 32, e, &ENV_QUANTA))
    }

    /// Error amplitude bound at `s` under degradation `d` (before the
    /// unit-noise factor), per observed coordinate.
    pub fn error_bound(&self, s: &[f64], d: f64) -> [f64; 4] {
        let k = self.turn_scale(s);
        let d = self.excess(d);
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] = k * (self.params.floor[j] * (1.0 + self.params.noise_gain * d) + self.params.bias[j] * d);
        }
        out
    }
}

impl Observer for DroneObserver {
    fn observe(&self, s: &[f64], e: &[f64]) -> Vec<f64> {
        let d = self.excess(self.degradation(e));
        let k = self.turn_scale(s);
        let key = [s[X], s[Y], s[Z], s[PSI], e[0], e[1]];
        let quanta = [STATE_QUANTA[0], STATE_QUANTA[1], STATE_QUANTA[2], STATE_QUANTA[3], ENV_QUANTA[0], ENV_QUANTA[1]];
        (0..4)
            .map(|j| {
                let w = unit_noise(hash_quantized(self.params.salt.wrapping_add(j as u64), &key, &quanta));
                let noise = self.params.floor[j] * (1.0 + self.params.noise_gain * d) * w;
                let bias = self.params.bias[j] * d * self.bias_direction(e, j);
                s[OBSERVED[j]] + k * (noise + bias)
            })
            .collect()
    }
}
