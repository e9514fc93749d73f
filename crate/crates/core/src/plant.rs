//! Two-link planar arm in the horizontal plane, driven by six muscles.
//!
//! Muscles: shoulder flexor/extensor (SF, SE), elbow flexor/extensor (EF, EE)
//! and bi-articular flexor/extensor (BF, BE). Moment arms are constant, so
//! muscle length is linear in the joint angles. Force is
//! `a · F_max · f_l(l̂) · f_v(v̂)` with a Gaussian force-length curve and a
//! hyperbolic force-velocity curve capped at 1.5 when lengthening.
//!
//! Sign conventions: positive joint angles are flexion, a positive moment arm
//! means the muscle flexes that joint, and muscle velocity `v` is the rate of
//! change of length (positive when lengthening).
//!
//! One timestep is recorded on a [`Tape`] so that losses can be
//! backpropagated through whole rollouts. The plain-value helpers in this
//! module exist for tests, observation and reporting.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::tape::{Shape, Tape, TapeError, Var};

pub const N_MUSCLES: usize = 6;
/// Width of the observation vector fed to the controller.
pub const N_OBS: usize = 16;

/// Shortening velocity (in `v_max` units) below which `f_v` sits at its cap.
const LENGTHENING_CAP_AT: f64 = 1.0 / 14.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Muscle {
    ShoulderFlexor,
    ShoulderExtensor,
    ElbowFlexor,
    ElbowExtensor,
    BiarticularFlexor,
    BiarticularExtensor,
}

impl Muscle {
    pub const ALL: [Muscle; N_MUSCLES] = [
        Muscle::ShoulderFlexor,
        Muscle::ShoulderExtensor,
        Muscle::ElbowFlexor,
        Muscle::ElbowExtensor,
        Muscle::BiarticularFlexor,
        Muscle::BiarticularExtensor,
    ];

    pub fn abbrev(self) -> &'static str {
        ["SF", "SE", "EF", "EE", "BF", "BE"][self as usize]
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct ArmParams {
    /// Link lengths (m).
    pub l1: f64,
    pub l2: f64,
    /// Link masses (kg).
    pub m1: f64,
    pub m2: f64,
    /// Centre of mass distance from the proximal joint (m).
    pub d1: f64,
    pub d2: f64,
    /// Moments of inertia about the centre of mass (kg m^2).
    pub i1: f64,
    pub i2: f64,
    /// Joint viscous damping (N m s / rad).
    pub damping: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            l1: 0.30,
            l2: 0.33,
            m1: 1.4,
            m2: 1.0,
            d1: 0.11,
            d2: 0.16,
            i1: 0.025,
            i2: 0.045,
            damping: 0.05,
            dt: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct MuscleParams {
    /// Maximum isometric force (N), in [`Muscle::ALL`] order.
    pub f_max: [f64; N_MUSCLES],
    /// Signed (shoulder, elbow) moment arms (m).
    pub moment_arms: [[f64; 2]; N_MUSCLES],
    /// Length at the reference posture (m).
    pub l0: [f64; N_MUSCLES],
    pub tau_act: f64,
    pub tau_deact: f64,
    /// Maximum shortening velocity in reference lengths per second.
    pub v_max: f64,
}

impl Default for MuscleParams {
    fn default() -> Self {
        MuscleParams {
            f_max: [700.0, 700.0, 500.0, 500.0, 400.0, 400.0],
            moment_arms: [
                [0.04, 0.0],
                [-0.04, 0.0],
                [0.0, 0.025],
                [0.0, -0.025],
                [0.028, 0.028],
                [-0.035, -0.035],
            ],
            l0: [0.12, 0.12, 0.10, 0.10, 0.16, 0.16],
            tau_act: 0.015,
            tau_deact: 0.05,
            v_max: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct PlantConfig {
    pub arm: ArmParams,
    pub muscles: MuscleParams,
    /// Reference posture (rad) at which every muscle has length `l0`.
    pub q0: [f64; 2],
    pub feedback: FeedbackGain,
}

/// Fixed gains between the observation and the controller input. Positions
/// are in metres and a 1 cm error is otherwise a 0.01 input difference.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct FeedbackGain {
    /// Applied to target and endpoint.
    pub position: f64,
    /// Applied to normalised muscle velocities.
    pub velocity: f64,
}

impl Default for FeedbackGain {
    fn default() -> Self {
        FeedbackGain { position: 10.0, velocity: 10.0 }
    }
}

impl FeedbackGain {
    pub const UNIT: FeedbackGain = FeedbackGain { position: 1.0, velocity: 1.0 };

    /// Per-channel gains in observation order.
    pub fn channels(&self) -> [f64; N_OBS] {
        let mut g = [1.0; N_OBS];
        g[0..4].fill(self.position);
        g[10..16].fill(self.velocity);
        g
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            arm: ArmParams::default(),
            muscles: MuscleParams::default(),
            q0: [45f64.to_radians(), 90f64.to_radians()],
            feedback: FeedbackGain::default(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.arm;
        let positive = [a.l1, a.l2, a.m1, a.m2, a.d1, a.d2, a.i1, a.i2, a.dt];
        if positive.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfig("arm lengths, masses, inertias and dt must be positive".into()));
        }
        if !(a.damping >= 0.0) {
            return Err(Error::InvalidConfig("joint damping must be non-negative".into()));
        }
        let m = &self.muscles;
        if m.f_max.iter().chain(m.l0.iter()).any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidConfig("muscle F_max and l0 must be positive".into()));
        }
        if !(m.tau_act > 0.0 && m.tau_deact > 0.0 && m.v_max > 0.0) {
            return Err(Error::InvalidConfig("muscle time constants and v_max must be positive".into()));
        }
        let r = &m.moment_arms;
        let mono_ok = r[0][1] == 0.0 && r[1][1] == 0.0 && r[2][0] == 0.0 && r[3][0] == 0.0;
        if !mono_ok {
            return Err(Error::InvalidConfig("mono-articular muscles must span a single joint".into()));
        }
        if !(self.feedback.position.is_finite() && self.feedback.velocity.is_finite()) {
            return Err(Error::InvalidConfig("feedback gains must be finite".into()));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.arm.l1 + self.arm.l2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub q: [f64; 2],
    pub qdot: [f64; 2],
    pub a: [f64; N_MUSCLES],
    pub t: usize,
}

impl PlantState {
    /// At rest with relaxed muscles.
    pub fn at_rest(q: [f64; 2]) -> Self {
        PlantState { q, qdot: [0.0; 2], a: [0.0; N_MUSCLES], t: 0 }
    }
}

// ---- plain-value kinematics and muscle mechanics ----------------------------

pub fn forward_kinematics(q: [f64; 2], arm: &ArmParams) -> [f64; 2] {
    let q12 = q[0] + q[1];
    [
        arm.l1 * math::cos(q[0]) + arm.l2 * math::cos(q12),
        arm.l1 * math::sin(q[0]) + arm.l2 * math::sin(q12),
    ]
}

/// `∂p/∂q`, row-major: `j[row][col]`.
pub fn endpoint_jacobian(q: [f64; 2], arm: &ArmParams) -> [[f64; 2]; 2] {
    let q12 = q[0] + q[1];
    let (s1, c1) = (math::sin(q[0]), math::cos(q[0]));
    let (s12, c12) = (math::sin(q12), math::cos(q12));
    [
        [-arm.l1 * s1 - arm.l2 * s12, -arm.l2 * s12],
        [arm.l1 * c1 + arm.l2 * c12, arm.l2 * c12],
    ]
}

/// Joint torque produced by an endpoint force, `Jᵀ F`.
pub fn external_torque(q: [f64; 2], force: [f64; 2], arm: &ArmParams) -> [f64; 2] {
    let j = endpoint_jacobian(q, arm);
    [j[0][0] * force[0] + j[1][0] * force[1], j[0][1] * force[0] + j[1][1] * force[1]]
}

fn inertia_terms(arm: &ArmParams) -> (f64, f64, f64) {
    let alpha = arm.i1 + arm.i2 + arm.m1 * arm.d1 * arm.d1 + arm.m2 * (arm.l1 * arm.l1 + arm.d2 * arm.d2);
    let beta = arm.m2 * arm.l1 * arm.d2;
    let delta = arm.i2 + arm.m2 * arm.d2 * arm.d2;
    (alpha, beta, delta)
}

pub fn mass_matrix(q: [f64; 2], arm: &ArmParams) -> [[f64; 2]; 2] {
    let (alpha, beta, delta) = inertia_terms(arm);
    let c2 = math::cos(q[1]);
    let m12 = delta + beta * c2;
    [[alpha + 2.0 * beta * c2, m12], [m12, delta]]
}

pub fn kinetic_energy(state: &PlantState, arm: &ArmParams) -> f64 {
    let m = mass_matrix(state.q, arm);
    let v = state.qdot;
    0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1])
}

/// Muscle lengths (m) and velocities (m/s, positive when lengthening).
pub fn muscle_geometry(q: [f64; 2], qdot: [f64; 2], cfg: &PlantConfig) -> ([f64; N_MUSCLES], [f64; N_MUSCLES]) {
    let m = &cfg.muscles;
    let mut l = [0.0; N_MUSCLES];
    let mut v = [0.0; N_MUSCLES];
    for i in 0..N_MUSCLES {
        let r = m.moment_arms[i];
        l[i] = m.l0[i] - (r[0] * (q[0] - cfg.q0[0]) + r[1] * (q[1] - cfg.q0[1]));
        v[i] = -(r[0] * qdot[0] + r[1] * qdot[1]);
    }
    (l, v)
}

pub fn force_length(l_norm: f64) -> f64 {
    let x = (l_norm - 1.0) / 0.5;
    math::exp(-x * x)
}

/// Force-velocity factor as a function of normalised lengthening velocity
/// `v̂ = v / (v_max · l0)`.
pub fn force_velocity(v_norm: f64) -> f64 {
    let shortening = -v_norm;
    if shortening <= -LENGTHENING_CAP_AT {
        1.5
    } else {
        ((1.0 - shortening) / (1.0 + 4.0 * shortening)).max(0.0)
    }
}

pub fn muscle_force(
    a: &[f64; N_MUSCLES],
    l: &[f64; N_MUSCLES],
    v: &[f64; N_MUSCLES],
    muscles: &MuscleParams,
) -> [f64; N_MUSCLES] {
    let mut f = [0.0; N_MUSCLES];
    for i in 0..N_MUSCLES {
        let l_norm = l[i] / muscles.l0[i];
        let v_norm = v[i] / (muscles.v_max * muscles.l0[i]);
        f[i] = a[i] * muscles.f_max[i] * force_length(l_norm) * force_velocity(v_norm);
    }
    f
}

// ---- recorded dynamics -------------------------------------------------------

/// Per-rollout constants, recorded once as tape leaves and shared by every step.
#[derive(Clone, Debug)]
pub struct TapedPlant {
    /// q -> (q1, q1 + q2, q2)
    angle_map: Var,
    kin_cos: Var,
    kin_sin: Var,
    /// q - q0 -> l̂ - 1
    stretch_map: Var,
    /// qdot -> v̂
    velocity_map: Var,
    q0: Var,
    /// Rᵀ diag(F_max)
    torque_map: Var,
    /// (cos θ, sin θ) weights and the map to joint torques for the endpoint force.
    external: Option<(Var, Var, Var)>,
    row_two_one: Var,
    feedback: Option<Var>,
    dt: f64,
    damping: f64,
    inertia: (f64, f64, f64),
    rate_act: f64,
    rate_deact: f64,
}

/// Geometry of the current state, shared by `observe` and `step`.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub cos_angles: Var,
    pub sin_angles: Var,
    pub endpoint: Var,
    /// `l / l0 - 1`
    pub stretch: Var,
    /// `v / (v_max l0)`
    pub velocity: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct TapedState {
    pub q: Var,
    pub qdot: Var,
    pub a: Var,
    pub t: usize,
}

impl TapedState {
    pub fn constant(tape: &mut Tape, s: &PlantState) -> Self {
        TapedState {
            q: tape.constant_vector(&s.q),
            qdot: tape.constant_vector(&s.qdot),
            a: tape.constant_vector(&s.a),
            t: s.t,
        }
    }

    pub fn read(&self, tape: &Tape) -> PlantState {
        let mut out = PlantState::at_rest([0.0; 2]);
        out.q.copy_from_slice(tape.value(self.q));
        out.qdot.copy_from_slice(tape.value(self.qdot));
        out.a.copy_from_slice(tape.value(self.a));
        out.t = self.t;
        out
    }
}

impl TapedPlant {
    pub fn new(tape: &mut Tape, cfg: &PlantConfig, external_force: [f64; 2]) -> Self {
        let arm = &cfg.arm;
        let m = &cfg.muscles;
        let angle_map = tape.constant(&[1.0, 0.0, 1.0, 1.0, 0.0, 1.0], Shape::matrix(3, 2));
        let kin_cos = tape.constant(&[arm.l1, arm.l2, 0.0, 0.0, 0.0, 0.0], Shape::matrix(2, 3));
        let kin_sin = tape.constant(&[0.0, 0.0, 0.0, arm.l1, arm.l2, 0.0], Shape::matrix(2, 3));

        let mut stretch = Vec::with_capacity(2 * N_MUSCLES);
        let mut velocity = Vec::with_capacity(2 * N_MUSCLES);
        for i in 0..N_MUSCLES {
            for j in 0..2 {
                stretch.push(-m.moment_arms[i][j] / m.l0[i]);
                velocity.push(-m.moment_arms[i][j] / (m.v_max * m.l0[i]));
            }
        }
        let stretch_map = tape.constant(&stretch, Shape::matrix(N_MUSCLES, 2));
        let velocity_map = tape.constant(&velocity, Shape::matrix(N_MUSCLES, 2));
        let q0 = tape.constant_vector(&cfg.q0);

        let mut torque = [0.0; 2 * N_MUSCLES];
        for i in 0..N_MUSCLES {
            torque[i] = m.moment_arms[i][0] * m.f_max[i];
            torque[N_MUSCLES + i] = m.moment_arms[i][1] * m.f_max[i];
        }
        let torque_map = tape.constant(&torque, Shape::matrix(2, N_MUSCLES));

        let external = if external_force == [0.0, 0.0] {
            None
        } else {
            let [fx, fy] = external_force;
            let wc = tape.constant_vector(&[arm.l1 * fy, arm.l2 * fy, 0.0]);
            let ws = tape.constant_vector(&[-arm.l1 * fx, -arm.l2 * fx, 0.0]);
            let to_joints = tape.constant(&[1.0, 1.0, 0.0, 0.0, 1.0, 0.0], Shape::matrix(2, 3));
            Some((wc, ws, to_joints))
        };
        let row_two_one = tape.constant(&[2.0, 1.0], Shape::matrix(1, 2));
        let feedback = (cfg.feedback != FeedbackGain::UNIT).then(|| tape.constant_vector(&cfg.feedback.channels()));

        TapedPlant {
            angle_map,
            kin_cos,
            kin_sin,
            stretch_map,
            velocity_map,
            q0,
            torque_map,
            external,
            row_two_one,
            feedback,
            dt: arm.dt,
            damping: arm.damping,
            inertia: inertia_terms(arm),
            rate_act: arm.dt / m.tau_act,
            rate_deact: arm.dt / m.tau_deact,
        }
    }

    pub fn geometry(&self, tape: &mut Tape, state: &TapedState) -> Geometry {
        let angles = tape.matvec(self.angle_map, state.q);
        let cos_angles = tape.cos(angles);
        let sin_angles = tape.sin(angles);
        let px = tape.matvec(self.kin_cos, cos_angles);
        let py = tape.matvec(self.kin_sin, sin_angles);
        let endpoint = tape.add(px, py);
        let dq = tape.sub(state.q, self.q0);
        let stretch = tape.matvec(self.stretch_map, dq);
        let velocity = tape.matvec(self.velocity_map, state.qdot);
        Geometry { cos_angles, sin_angles, endpoint, stretch, velocity }
    }

    /// `[target, endpoint, l/l0, v/(v_max l0)]`, 16 values.
    pub fn observe(&self, tape: &mut Tape, geom: &Geometry, target: Var) -> Var {
        let l_norm = tape.offset(geom.stretch, 1.0);
        tape.concat(&[target, geom.endpoint, l_norm, geom.velocity])
    }

    /// Controller input for observation `obs`.
    pub fn sense(&self, tape: &mut Tape, obs: Var) -> Var {
        match self.feedback {
            Some(g) => tape.mul(obs, g),
            None => obs,
        }
    }

    /// Advances one timestep under excitation `u`.
    pub fn step(&self, tape: &mut Tape, state: &TapedState, geom: &Geometry, u: Var) -> Result<TapedState, TapeError> {
        // Activation: first-order lag with separate rise/decay constants.
        let mut rates = [0.0; N_MUSCLES];
        {
            let uv = tape.value(u);
            let av = tape.value(state.a);
            for i in 0..N_MUSCLES {
                rates[i] = if uv[i] >= av[i] { self.rate_act } else { self.rate_deact };
            }
        }
        let rates = tape.constant_vector(&rates);
        let diff = tape.sub(u, state.a);
        let inc = tape.mul(diff, rates);
        let raw = tape.add(state.a, inc);
        let a = tape.clamp(raw, 0.0, 1.0);

        // Force-length.
        let sq = tape.square(geom.stretch);
        let sq = tape.scale(sq, -4.0);
        let fl = tape.exp(sq);

        // Force-velocity; shortening speeds past the cap point are held there.
        let neg = tape.scale(geom.velocity, -1.0);
        let shifted = tape.offset(neg, LENGTHENING_CAP_AT);
        let shifted = tape.relu(shifted);
        let num = tape.scale(shifted, -1.0);
        let num = tape.offset(num, 1.0 + LENGTHENING_CAP_AT);
        let den = tape.scale(shifted, 4.0);
        let den = tape.offset(den, 1.0 - 4.0 * LENGTHENING_CAP_AT);
        let den = tape.recip(den);
        let fv = tape.mul(num, den);
        let fv = tape.relu(fv);

        let drive = tape.mul(a, fl);
        let drive = tape.mul(drive, fv);
        let mut torque = tape.matvec(self.torque_map, drive);

        if let Some((wc, ws, to_joints)) = self.external {
            let c = tape.mul(geom.cos_angles, wc);
            let s = tape.mul(geom.sin_angles, ws);
            let g = tape.add(c, s);
            let ext = tape.matvec(to_joints, g);
            torque = tape.add(torque, ext);
        }

        // Rigid body: M(q) q̈ = τ - C(q, q̇) - b q̇.
        let (alpha, beta, delta) = self.inertia;
        let c2 = tape.slice(geom.cos_angles, 2, 1);
        let s2 = tape.slice(geom.sin_angles, 2, 1);
        let qd1 = tape.slice(state.qdot, 0, 1);
        let qd2 = tape.slice(state.qdot, 1, 1);
        let w = tape.matvec(self.row_two_one, state.qdot);
        let cor1 = tape.mul(qd2, w);
        let cor2 = tape.square(qd1);
        let cor2 = tape.scale(cor2, -1.0);
        let cor = tape.concat(&[cor1, cor2]);
        let h = tape.scale(s2, beta);
        let h = tape.broadcast(h, 2);
        let cor = tape.mul(h, cor);
        let damp = tape.scale(state.qdot, -self.damping);
        let rhs = tape.add(torque, cor);
        let rhs = tape.add(rhs, damp);

        let c2sq = tape.square(c2);
        let det = tape.scale(c2sq, -beta * beta);
        let det = tape.offset(det, alpha * delta - delta * delta);
        let inv_det = tape.recip(det);
        let m12 = tape.scale(c2, beta);
        let m12 = tape.offset(m12, delta);
        let m11 = tape.scale(c2, 2.0 * beta);
        let m11 = tape.offset(m11, alpha);
        let r1 = tape.slice(rhs, 0, 1);
        let r2 = tape.slice(rhs, 1, 1);
        let a1 = tape.scale(r1, delta);
        let b1 = tape.mul(m12, r2);
        let n1 = tape.sub(a1, b1);
        let a2 = tape.mul(m11, r2);
        let b2 = tape.mul(m12, r1);
        let n2 = tape.sub(a2, b2);
        let num = tape.concat(&[n1, n2]);
        let inv_det = tape.broadcast(inv_det, 2);
        let qddot = tape.mul(inv_det, num);

        // Semi-implicit Euler.
        let dv = tape.scale(qddot, self.dt);
        let qdot = tape.add(state.qdot, dv);
        let dq = tape.scale(qdot, self.dt);
        let q = tape.add(state.q, dq);

        tape.status()?;
        Ok(TapedState { q, qdot, a, t: state.t + 1 })
    }
}

/// One plant step on plain values.
pub fn step(state: &PlantState, u: &[f64; N_MUSCLES], external_force: [f64; 2], cfg: &PlantConfig) -> Result<PlantState> {
    let mut tape = Tape::with_capacity(96, 256);
    let plant = TapedPlant::new(&mut tape, cfg, external_force);
    let s = TapedState::constant(&mut tape, state);
    let u = tape.constant_vector(u);
    let geom = plant.geometry(&mut tape, &s);
    let next = plant
        .step(&mut tape, &s, &geom, u)
        .map_err(|cause| Error::Diverged { trial: 0, step: state.t, cause })?;
    Ok(next.read(&tape))
}

/// Observation vector on plain values.
pub fn observe(state: &PlantState, target: [f64; 2], cfg: &PlantConfig) -> [f64; N_OBS] {
    let p = forward_kinematics(state.q, &cfg.arm);
    let (l, v) = muscle_geometry(state.q, state.qdot, cfg);
    let mut x = [0.0; N_OBS];
    x[0..2].copy_from_slice(&target);
    x[2..4].copy_from_slice(&p);
    for i in 0..N_MUSCLES {
        x[4 + i] = l[i] / cfg.muscles.l0[i];
        x[10 + i] = v[i] / (cfg.muscles.v_max * cfg.muscles.l0[i]);
    }
    x
}

/// Controller input on plain values.
pub fn sense(obs: &[f64; N_OBS], cfg: &PlantConfig) -> [f64; N_OBS] {
    let g = cfg.feedback.channels();
    core::array::from_fn(|i| obs[i] * g[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn feedback_gain_scales_position_and_velocity_only() {
        let cfg = PlantConfig { feedback: FeedbackGain { position: 10.0, velocity: 3.0 }, ..PlantConfig::default() };
        let obs: [f64; N_OBS] = core::array::from_fn(|i| i as f64 + 1.0);
        let x = sense(&obs, &cfg);
        for i in 0..N_OBS {
            let g = match i {
                0..=3 => 10.0,
                4..=9 => 1.0,
                _ => 3.0,
            };
            assert_eq!(x[i], g * obs[i]);
        }
        let unit = PlantConfig { feedback: FeedbackGain::UNIT, ..PlantConfig::default() };
        assert_eq!(sense(&obs, &unit), obs);
    }

    #[test]
    fn forward_kinematics_examples() {
        let arm = ArmParams::default();
        let p = forward_kinematics([0.0, 0.0], &arm);
        assert!(close(p[0], 0.63, 1e-12) && close(p[1], 0.0, 1e-12));
        let p = forward_kinematics([FRAC_PI_2, 0.0], &arm);
        assert!(close(p[0], 0.0, 1e-12) && close(p[1], 0.63, 1e-12));
        let p = forward_kinematics([0.0, FRAC_PI_2], &arm);
        assert!(close(p[0], 0.30, 1e-12) && close(p[1], 0.33, 1e-12));
    }

    #[test]
    fn jacobian_at_zero_and_force_mapping() {
        // Symbolic: ∂px/∂q1 = -L1 s1 - L2 s12, ∂py/∂q1 = L1 c1 + L2 c12, ∂px/∂q2 = -L2 s12, ∂py/∂q2 = L2 c12.
        let arm = ArmParams::default();
        let j = endpoint_jacobian([0.0, 0.0], &arm);
        assert!(close(j[0][0], 0.0, 1e-15) && close(j[1][0], 0.63, 1e-15));
        assert!(close(j[0][1], 0.0, 1e-15) && close(j[1][1], 0.33, 1e-15));
        let tau = external_torque([0.0, 0.0], [0.0, 1.0], &arm);
        assert!(close(tau[0], 0.63, 1e-15) && close(tau[1], 0.33, 1e-15));
    }

    #[test]
    fn geometry_examples() {
        let cfg = PlantConfig::default();
        let (l, v) = muscle_geometry(cfg.q0, [0.0; 2], &cfg);
        assert_eq!(l, cfg.muscles.l0);
        assert_eq!(v, [0.0; 6]);

        let (l, _) = muscle_geometry([cfg.q0[0] + 0.1, cfg.q0[1]], [0.0; 2], &cfg);
        assert!(close(l[0], cfg.muscles.l0[0] - 0.004, 1e-15));

        let (_, v) = muscle_geometry(cfg.q0, [0.0, 1.0], &cfg);
        assert!(close(v[3], 0.025, 1e-15));
    }

    #[test]
    fn muscle_force_examples() {
        let m = MuscleParams::default();
        let zero = muscle_force(&[0.0; 6], &m.l0, &[0.0; 6], &m);
        assert_eq!(zero, [0.0; 6]);
        let full = muscle_force(&[1.0; 6], &m.l0, &[0.0; 6], &m);
        assert_eq!(full, m.f_max);
        let mut m100 = m.clone();
        m100.f_max = [100.0; 6];
        let half = muscle_force(&[0.5; 6], &m100.l0, &[0.0; 6], &m100);
        assert_eq!(half, [50.0; 6]);
    }

    #[test]
    fn force_velocity_shape() {
        assert_eq!(force_velocity(0.0), 1.0);
        // shortening at v_max produces no force
        assert_eq!(force_velocity(-1.0), 0.0);
        assert!(force_velocity(-0.5) < 1.0);
        // lengthening rises to the cap, continuously
        assert!(close(force_velocity(LENGTHENING_CAP_AT), 1.5, 1e-12));
        assert_eq!(force_velocity(0.5), 1.5);
        assert!(force_velocity(0.03) > 1.0 && force_velocity(0.03) < 1.5);
    }

    #[test]
    fn equilibrium_at_rest() {
        let cfg = PlantConfig::default();
        let s = PlantState::at_rest([0.7, 1.2]);
        let next = step(&s, &[0.0; 6], [0.0, 0.0], &cfg).unwrap();
        assert_eq!(next.q, s.q);
        assert_eq!(next.qdot, s.qdot);
        assert_eq!(next.a, s.a);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn activation_rise_after_one_step() {
        let cfg = PlantConfig::default();
        let s = PlantState::at_rest(cfg.q0);
        let next = step(&s, &[1.0; 6], [0.0, 0.0], &cfg).unwrap();
        for a in next.a {
            assert!(close(a, 0.01 / 0.015, 1e-15));
        }
    }

    #[test]
    fn taped_and_plain_observation_agree() {
        let cfg = PlantConfig::default();
        let s = PlantState { q: [0.5, 1.4], qdot: [0.3, -0.8], a: [0.1; 6], t: 0 };
        let mut tape = Tape::new();
        let plant = TapedPlant::new(&mut tape, &cfg, [0.0, 0.0]);
        let ts = TapedState::constant(&mut tape, &s);
        let target = tape.constant_vector(&[0.3, 0.3]);
        let g = plant.geometry(&mut tape, &ts);
        let x = plant.observe(&mut tape, &g, target);
        let plain = observe(&s, [0.3, 0.3], &cfg);
        for (a, b) in tape.value(x).iter().zip(plain.iter()) {
            assert!(close(*a, *b, 1e-14), "{a} vs {b}");
        }
    }

    #[test]
    fn observation_at_reference_posture() {
        let cfg = PlantConfig::default();
        let s = PlantState::at_rest(cfg.q0);
        let x = observe(&s, [0.3, 0.3], &cfg);
        let p = forward_kinematics(cfg.q0, &cfg.arm);
        assert_eq!(x.len(), N_OBS);
        assert_eq!(&x[0..2], &[0.3, 0.3]);
        assert_eq!(&x[2..4], &p);
        assert_eq!(&x[4..10], &[1.0; 6]);
        assert_eq!(&x[10..16], &[0.0; 6]);
        let y = observe(&s, [-0.1, 0.5], &cfg);
        assert_eq!(&x[2..], &y[2..]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = PlantConfig::default();
        cfg.arm.dt = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PlantConfig::default();
        cfg.muscles.moment_arms[0][1] = 0.01;
        assert!(cfg.validate().is_err());
        assert!(PlantConfig::default().validate().is_ok());
    }
}
