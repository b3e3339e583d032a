//! Lateral vehicle model in Frenet coordinates.
//!
//! The continuous dynamics `ḋ = v (θ − θ_ref)`, `θ̇ = v κ` with a triple
//! integrator on curvature are discretized exactly for a speed held
//! constant over one sampling interval.

use crate::error::{invalid, Result};

/// Lateral state `[d, θ, κ, κ̇]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    /// Lateral displacement (m).
    pub d: f64,
    /// Absolute heading (rad).
    pub theta: f64,
    /// Curvature (1/m).
    pub kappa: f64,
    /// Time derivative of curvature.
    pub kappa_dot: f64,
}

/// Reference tuples live in state coordinates.
pub type Reference = State;

impl State {
    pub const ZERO: State = State { d: 0.0, theta: 0.0, kappa: 0.0, kappa_dot: 0.0 };

    pub const fn new(d: f64, theta: f64, kappa: f64, kappa_dot: f64) -> Self {
        Self { d, theta, kappa, kappa_dot }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.d, self.theta, self.kappa, self.kappa_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Second time derivative of curvature.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Input(pub f64);

/// One step of `x⁺ = A x + B u + D w` for a fixed speed and sampling time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsStep {
    a: [[f64; 4]; 4],
    b: [f64; 4],
    d: [f64; 4],
    speed: f64,
    ts: f64,
}

/// Builds the discrete dynamics for speed `v` (m/s) and sampling time `ts` (s).
///
/// `ts == 0` is accepted and yields the identity step.
pub fn build_dynamics(v: f64, ts: f64) -> Result<DynamicsStep> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid!("speed must be finite and nonnegative, got {v}"));
    }
    if !ts.is_finite() || ts < 0.0 {
        return Err(invalid!("sampling time must be finite and nonnegative, got {ts}"));
    }
    let (t2, t3, t4) = (ts * ts, ts * ts * ts, ts * ts * ts * ts);
    let v2 = v * v;
    let a = [
        [1.0, v * ts, 0.5 * v2 * t2, v2 * t3 / 6.0],
        [0.0, 1.0, v * ts, 0.5 * v * t2],
        [0.0, 0.0, 1.0, ts],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let b = [v2 * t4 / 24.0, v * t3 / 6.0, 0.5 * t2, ts];
    let d = [-v * ts, 0.0, 0.0, 0.0];
    Ok(DynamicsStep { a, b, d, speed: v, ts })
}

impl DynamicsStep {
    pub fn a(&self) -> &[[f64; 4]; 4] {
        &self.a
    }

    pub fn b(&self) -> &[f64; 4] {
        &self.b
    }

    pub fn d(&self) -> &[f64; 4] {
        &self.d
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// `A x + B u + D w`, where `w` is the reference tangent angle (rad).
    pub fn step(&self, x: State, u: Input, w: f64) -> Result<State> {
        if !x.is_finite() || !u.0.is_finite() || !w.is_finite() {
            return Err(invalid!("non-finite state, input or disturbance"));
        }
        Ok(State::from_array(self.apply(x.to_array(), u.0, w)))
    }

    pub(crate) fn apply(&self, x: [f64; 4], u: f64, w: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a[i];
            *o = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3] + self.b[i] * u + self.d[i] * w;
        }
        out
    }
}

/// Box bounds `|κ| ≤ kappa_max`, `|u| ≤ u_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSets {
    kappa_max: f64,
    u_max: f64,
}

impl AdmissibleSets {
    pub fn new(kappa_max: f64, u_max: f64) -> Result<Self> {
        if !(kappa_max > 0.0 && kappa_max.is_finite() && u_max > 0.0 && u_max.is_finite()) {
            return Err(invalid!("admissible bounds must be positive and finite, got κ {kappa_max}, u {u_max}"));
        }
        Ok(Self { kappa_max, u_max })
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }
}

impl Default for AdmissibleSets {
    fn default() -> Self {
        Self { kappa_max: 0.02, u_max: 0.425 }
    }
}

/// Closed-set membership test.
pub fn is_admissible(x: &State, u: Input, sets: &AdmissibleSets) -> bool {
    libm::fabs(x.kappa) <= sets.kappa_max && libm::fabs(u.0) <= sets.u_max
}
