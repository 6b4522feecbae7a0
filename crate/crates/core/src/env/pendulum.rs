use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::{
    ensure_action, ensure_finite, safe_acos, uniform, wrap_angle, EnvDescriptor, EnvId,
    Environment, GoalFeature, GoalSet,
};
use crate::{Error, Result};

/// Physical constants of the pendulum (thin rod pivoting at one end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub horizon: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            horizon: 200,
        }
    }
}

/// `theta` is kept unwrapped; everything that needs an angle goes through
/// `cos`/`sin` or [`wrap_angle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub omega: f64,
}

impl PendulumState {
    pub const fn new(theta: f64, omega: f64) -> Self {
        Self { theta, omega }
    }
}

/// Torque-limited pendulum. Angular acceleration is
/// `-(3 g / 2 l) sin(theta) + 3 / (m l^2) * torque`, integrated at 20 Hz.
#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    goal: GoalSet<PendulumState>,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new(PendulumParams::default())
    }
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Self {
        let goal = GoalSet::new(vec![
            GoalFeature {
                name: "cos_theta",
                extract: |s: &PendulumState| libm::cos(s.theta),
                center: 1.0,
                half_width: 1.0 / 20.0,
            },
            GoalFeature {
                name: "sin_theta",
                extract: |s: &PendulumState| libm::sin(s.theta),
                center: 0.0,
                half_width: 1.0 / 20.0,
            },
            GoalFeature {
                name: "omega",
                extract: |s: &PendulumState| s.omega,
                center: 0.0,
                half_width: 3.0 / 10.0,
            },
        ]);
        Self { params, goal }
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    /// Angular acceleration for an already clamped torque.
    pub fn angular_acceleration(&self, theta: f64, torque: f64) -> f64 {
        let PendulumParams {
            gravity: g,
            mass: m,
            length: l,
            ..
        } = self.params;
        -(3.0 * g / (2.0 * l)) * libm::sin(theta) + 3.0 / (m * l * l) * torque
    }

    /// Mechanical energy consistent with the dynamics above, zero at rest at
    /// `theta = 0`: `(m l^2 / 3) omega^2 / 2 + (m g l / 2)(1 - cos theta)`.
    pub fn energy(&self, state: &PendulumState) -> f64 {
        let PendulumParams {
            gravity: g,
            mass: m,
            length: l,
            ..
        } = self.params;
        0.5 * (m * l * l / 3.0) * state.omega * state.omega
            + 0.5 * m * g * l * (1.0 - libm::cos(state.theta))
    }
}

impl Environment for Pendulum {
    type State = PendulumState;

    fn descriptor(&self) -> EnvDescriptor {
        EnvDescriptor {
            id: EnvId::Pendulum,
            state_dim: 2,
            observation_dim: 3,
            action_dim: 1,
            action_low: -self.params.max_torque,
            action_high: self.params.max_torque,
            dt: self.params.dt,
            train_horizon: self.params.horizon,
            eval_horizon: self.params.horizon,
        }
    }

    fn step(&self, state: &PendulumState, torque: f64) -> Result<PendulumState> {
        ensure_finite("theta", state.theta)?;
        ensure_finite("omega", state.omega)?;
        ensure_action(torque)?;
        let torque = torque.clamp(-self.params.max_torque, self.params.max_torque);
        let dt = self.params.dt;
        let omega = state.omega + dt * self.angular_acceleration(state.theta, torque);
        let theta = state.theta + dt * omega;
        Ok(PendulumState { theta, omega })
    }

    fn reward(&self, state: &PendulumState, torque: f64) -> f64 {
        let angle = safe_acos(libm::cos(state.theta));
        -(angle * angle + 0.1 * state.omega * state.omega + 0.001 * torque * torque)
    }

    fn observe_into(&self, state: &PendulumState, out: &mut [f64]) {
        out[0] = libm::cos(state.theta);
        out[1] = libm::sin(state.theta);
        out[2] = state.omega;
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> PendulumState {
        let theta = uniform(rng, -PI, PI);
        let omega = uniform(rng, -1.0, 1.0);
        PendulumState { theta, omega }
    }

    fn goal(&self) -> &GoalSet<PendulumState> {
        &self.goal
    }

    fn state_norm(&self, state: &PendulumState) -> f64 {
        libm::hypot(wrap_angle(state.theta), state.omega)
    }

    fn state_to_vec(&self, state: &PendulumState) -> Vec<f64> {
        vec![state.theta, state.omega]
    }

    fn state_from_slice(&self, values: &[f64]) -> Result<PendulumState> {
        match *values {
            [theta, omega] => Ok(PendulumState { theta, omega }),
            _ => Err(Error::DimensionMismatch {
                expected: 2,
                found: values.len(),
            }),
        }
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-PI, PI), (-8.0, 8.0)]
    }
}
