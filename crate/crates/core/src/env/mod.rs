//! Benchmark dynamics.
//!
//! Both systems are deterministic discrete-time simulations integrated with
//! semi-implicit Euler (velocities first, then positions with the updated
//! velocities). States are plain `Copy` values; every method is a pure
//! function of its arguments.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::{Error, Result};

mod cartpole;
mod goal;
mod pendulum;

pub use cartpole::{CartPoleParams, CartPoleState, CartPoleSwingup};
pub use goal::{GoalFeature, GoalSet};
pub use pendulum::{Pendulum, PendulumParams, PendulumState};

/// Number of consecutive in-goal states at the end of a trial that count as
/// "reached and remained".
pub const GOAL_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    Pendulum,
    CartPoleSwingup,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Pendulum => "pendulum",
            EnvId::CartPoleSwingup => "cartpole_swingup",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvId::Pendulum),
            "cartpole_swingup" | "cartpole" => Ok(EnvId::CartPoleSwingup),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown environment `{other}`"
            ))),
        }
    }
}

/// Static facts about an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvDescriptor {
    pub id: EnvId,
    pub state_dim: usize,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    /// Integration step in seconds.
    pub dt: f64,
    pub train_horizon: usize,
    pub eval_horizon: usize,
}

impl EnvDescriptor {
    pub fn clamp_action(&self, action: f64) -> f64 {
        action.clamp(self.action_low, self.action_high)
    }
}

/// A deterministic control benchmark with a scalar action.
pub trait Environment: Sync {
    type State: Copy + PartialEq + fmt::Debug + Send + Sync;

    fn descriptor(&self) -> EnvDescriptor;

    /// One integration step. Actions are clamped to the action bounds first.
    fn step(&self, state: &Self::State, action: f64) -> Result<Self::State>;

    fn reward(&self, state: &Self::State, action: f64) -> f64;

    /// Writes the observation fed to networks into `out`
    /// (`out.len() == observation_dim`).
    fn observe_into(&self, state: &Self::State, out: &mut [f64]);

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn is_terminated(&self, _state: &Self::State) -> bool {
        false
    }

    fn goal(&self) -> &GoalSet<Self::State>;

    /// Euclidean norm of the state with angles wrapped to `(-pi, pi]`.
    ///
    /// This is the norm used by the one-step transition bound. Every goal
    /// feature is bounded by it, so `goal_distance(s) <= state_norm(s)`.
    fn state_norm(&self, state: &Self::State) -> f64;

    fn state_to_vec(&self, state: &Self::State) -> Vec<f64>;

    fn state_from_slice(&self, values: &[f64]) -> Result<Self::State>;

    /// Default box for certificate grids and fits, one `(low, high)` pair per
    /// state component.
    fn state_bounds(&self) -> Vec<(f64, f64)>;

    fn observe(&self, state: &Self::State) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.descriptor().observation_dim];
        self.observe_into(state, &mut out);
        out
    }

    fn goal_distance(&self, state: &Self::State) -> f64 {
        self.goal().distance(state)
    }

    fn in_goal(&self, state: &Self::State) -> bool {
        self.goal().contains(state)
    }

    /// Bound on the norm of the successor state. The benchmarks are
    /// deterministic, so this is the successor's norm itself.
    fn transition_bound(&self, state: &Self::State, action: f64) -> Result<f64> {
        Ok(self.state_norm(&self.step(state, action)?))
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use core::f64::consts::PI;
    let w = theta - 2.0 * PI * libm::floor((theta + PI) / (2.0 * PI));
    // floor puts +pi at -pi; keep the upper end closed.
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `acos` with its argument clamped to `[-1, 1]`.
pub(crate) fn safe_acos(x: f64) -> f64 {
    libm::acos(x.clamp(-1.0, 1.0))
}

pub(crate) fn ensure_finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteState { field, value })
    }
}

pub(crate) fn ensure_action(action: f64) -> Result<()> {
    if action.is_nan() {
        Err(Error::NonFiniteAction(action))
    } else {
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}
