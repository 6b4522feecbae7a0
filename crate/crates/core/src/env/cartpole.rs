use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::{
    ensure_action, ensure_finite, safe_acos, uniform, wrap_angle, EnvDescriptor, EnvId,
    Environment, GoalFeature, GoalSet,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
    pub dt: f64,
    pub max_force: f64,
    pub x_limit: f64,
    pub x_dot_limit: f64,
    pub theta_dot_limit: f64,
    pub train_horizon: usize,
    pub eval_horizon: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 0.5,
            gravity: 9.8,
            dt: 0.02,
            max_force: 10.0,
            x_limit: 5.0,
            x_dot_limit: 8.0,
            theta_dot_limit: 10.0,
            train_horizon: 200,
            eval_horizon: 1000,
        }
    }
}

/// Cart-pole state; `theta = 0` is the pole pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub const fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
        }
    }
}

/// Swing-up and balance of a pole on a force-driven cart, integrated at 50 Hz.
#[derive(Debug, Clone)]
pub struct CartPoleSwingup {
    params: CartPoleParams,
    goal: GoalSet<CartPoleState>,
}

impl Default for CartPoleSwingup {
    fn default() -> Self {
        Self::new(CartPoleParams::default())
    }
}

impl CartPoleSwingup {
    pub fn new(params: CartPoleParams) -> Self {
        const ANGLE: f64 = 1.0 / 20.0;
        const CART: f64 = 3.0 / 10.0;
        let goal = GoalSet::new(vec![
            GoalFeature {
                name: "cos_theta",
                extract: |s: &CartPoleState| libm::cos(s.theta),
                center: 1.0,
                half_width: ANGLE,
            },
            GoalFeature {
                name: "sin_theta",
                extract: |s: &CartPoleState| libm::sin(s.theta),
                center: 0.0,
                half_width: ANGLE,
            },
            GoalFeature {
                name: "theta_dot",
                extract: |s: &CartPoleState| s.theta_dot,
                center: 0.0,
                half_width: ANGLE,
            },
            GoalFeature {
                name: "x_dot",
                extract: |s: &CartPoleState| s.x_dot,
                center: 0.0,
                half_width: CART,
            },
            GoalFeature {
                name: "x",
                extract: |s: &CartPoleState| s.x,
                center: 0.0,
                half_width: CART,
            },
        ]);
        Self { params, goal }
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    /// `(x_ddot, theta_ddot)` for an already clamped force.
    pub fn accelerations(&self, state: &CartPoleState, force: f64) -> (f64, f64) {
        let CartPoleParams {
            cart_mass: mc,
            pole_mass: mp,
            pole_length: l,
            gravity: g,
            ..
        } = self.params;
        let (sin, cos) = (libm::sin(state.theta), libm::cos(state.theta));
        let x_ddot = (force + mp * l * state.theta_dot * state.theta_dot * sin
            - mp * g * sin * cos)
            / (mc + mp * sin * sin);
        let theta_ddot = (g * sin - x_ddot * cos) / l;
        (x_ddot, theta_ddot)
    }
}

impl Environment for CartPoleSwingup {
    type State = CartPoleState;

    fn descriptor(&self) -> EnvDescriptor {
        EnvDescriptor {
            id: EnvId::CartPoleSwingup,
            state_dim: 4,
            observation_dim: 5,
            action_dim: 1,
            action_low: -self.params.max_force,
            action_high: self.params.max_force,
            dt: self.params.dt,
            train_horizon: self.params.train_horizon,
            eval_horizon: self.params.eval_horizon,
        }
    }

    fn step(&self, state: &CartPoleState, force: f64) -> Result<CartPoleState> {
        ensure_finite("x", state.x)?;
        ensure_finite("x_dot", state.x_dot)?;
        ensure_finite("theta", state.theta)?;
        ensure_finite("theta_dot", state.theta_dot)?;
        ensure_action(force)?;
        let force = force.clamp(-self.params.max_force, self.params.max_force);
        let (x_ddot, theta_ddot) = self.accelerations(state, force);
        let dt = self.params.dt;
        let x_dot = state.x_dot + dt * x_ddot;
        let theta_dot = state.theta_dot + dt * theta_ddot;
        Ok(CartPoleState {
            x: state.x + dt * x_dot,
            x_dot,
            theta: state.theta + dt * theta_dot,
            theta_dot,
        })
    }

    fn reward(&self, state: &CartPoleState, _force: f64) -> f64 {
        let angle = safe_acos(libm::cos(state.theta));
        -(0.5 * angle * angle
            + 0.5 * state.x * state.x
            + state.theta_dot * state.theta_dot / 20.0
            + state.x_dot * state.x_dot / 20.0)
    }

    fn observe_into(&self, state: &CartPoleState, out: &mut [f64]) {
        out[0] = state.x;
        out[1] = state.x_dot;
        out[2] = libm::cos(state.theta);
        out[3] = libm::sin(state.theta);
        out[4] = state.theta_dot;
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> CartPoleState {
        // Draw order follows the (theta, x, theta_dot, x_dot) box.
        let theta = uniform(rng, 0.0, 2.0 * PI);
        let x = uniform(rng, -1.0, 1.0);
        let theta_dot = uniform(rng, -1.0, 1.0);
        let x_dot = uniform(rng, -1.0, 1.0);
        CartPoleState {
            x,
            x_dot,
            theta,
            theta_dot,
        }
    }

    fn is_terminated(&self, s: &CartPoleState) -> bool {
        s.x.abs() > self.params.x_limit
            || s.x_dot.abs() > self.params.x_dot_limit
            || s.theta_dot.abs() > self.params.theta_dot_limit
    }

    fn goal(&self) -> &GoalSet<CartPoleState> {
        &self.goal
    }

    fn state_norm(&self, s: &CartPoleState) -> f64 {
        let th = wrap_angle(s.theta);
        libm::sqrt(s.x * s.x + s.x_dot * s.x_dot + th * th + s.theta_dot * s.theta_dot)
    }

    fn state_to_vec(&self, s: &CartPoleState) -> Vec<f64> {
        vec![s.x, s.x_dot, s.theta, s.theta_dot]
    }

    fn state_from_slice(&self, values: &[f64]) -> Result<CartPoleState> {
        match *values {
            [x, x_dot, theta, theta_dot] => Ok(CartPoleState {
                x,
                x_dot,
                theta,
                theta_dot,
            }),
            _ => Err(Error::DimensionMismatch {
                expected: 4,
                found: values.len(),
            }),
        }
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        let p = &self.params;
        vec![
            (-p.x_limit, p.x_limit),
            (-p.x_dot_limit, p.x_dot_limit),
            (-PI, PI),
            (-p.theta_dot_limit, p.theta_dot_limit),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn upright_rest_is_fixed() {
        let env = CartPoleSwingup::default();
        let s = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(env.step(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn full_force_from_rest() {
        let env = CartPoleSwingup::default();
        let s = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
        let (x_ddot, theta_ddot) = env.accelerations(&s, 10.0);
        // sin(0) = 0, so only the cart mass resists the push.
        assert_abs_diff_eq!(x_ddot, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_ddot, -10.0 / 0.5, epsilon = 1e-12);
        let next = env.step(&s, 10.0).unwrap();
        assert_abs_diff_eq!(next.x_dot, 0.02 * 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.x, 0.02 * next.x_dot, epsilon = 1e-15);
    }

    #[test]
    fn termination_thresholds() {
        let env = CartPoleSwingup::default();
        assert!(env.is_terminated(&CartPoleState::new(5.01, 0.0, 0.0, 0.0)));
        assert!(env.is_terminated(&CartPoleState::new(-5.01, 0.0, 0.0, 0.0)));
        assert!(!env.is_terminated(&CartPoleState::new(5.0, 0.0, 0.0, 0.0)));
        assert!(env.is_terminated(&CartPoleState::new(0.0, 8.5, 0.0, 0.0)));
        assert!(env.is_terminated(&CartPoleState::new(0.0, 0.0, 0.0, -10.5)));
        assert!(!env.is_terminated(&CartPoleState::new(0.0, 7.9, 3.0, 9.9)));
    }

    #[test]
    fn reward_examples() {
        let env = CartPoleSwingup::default();
        assert_eq!(
            env.reward(&CartPoleState::new(0.0, 0.0, 0.0, 0.0), 0.0),
            0.0
        );
        assert_abs_diff_eq!(
            env.reward(&CartPoleState::new(0.0, 0.0, PI, 0.0), 0.0),
            -PI * PI / 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            env.reward(&CartPoleState::new(1.0, 2.0, 0.0, 2.0), 0.0),
            -0.9,
            epsilon = 1e-15
        );
    }

    #[test]
    fn observation_layout() {
        let env = CartPoleSwingup::default();
        let o = env.observe(&CartPoleState::new(0.0, 0.0, PI, 0.0));
        assert_eq!(o[0], 0.0);
        assert_eq!(o[1], 0.0);
        assert_eq!(o[2], -1.0);
        assert_abs_diff_eq!(o[3], 0.0, epsilon = 1e-15);
        assert_eq!(o[4], 0.0);
    }

    #[test]
    fn goal_bounds() {
        let env = CartPoleSwingup::default();
        assert!(env.in_goal(&CartPoleState::new(0.29, -0.29, 0.04, 0.049)));
        assert_abs_diff_eq!(
            env.goal_distance(&CartPoleState::new(0.0, 0.0, 0.0, 0.25)),
            0.2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            env.goal_distance(&CartPoleState::new(1.3, 0.0, 0.0, 0.0)),
            1.0,
            epsilon = 1e-15
        );
    }
}
