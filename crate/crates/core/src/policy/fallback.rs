//! Energy-shaping + PD fallback controllers.
//!
//! Far from the goal each controller drives the mechanical energy towards
//! its value at the goal; once the angle is within the switch threshold a
//! linear state feedback takes over. Default gains come from a coarse grid
//! search over goal-reach rate (see `calf-lab`'s tuning module) and are
//! frozen here.

use crate::env::{
    wrap_angle, CartPoleState, CartPoleSwingup, Environment, Pendulum, PendulumState,
};
use crate::{Error, Result};

use super::{Policy, PolicyKind};

/// Environments that ship a fallback controller.
pub trait WithFallback: Environment + Sized {
    type Fallback: Policy<Self> + Clone + Send + Sync;

    fn default_fallback(&self) -> Self::Fallback;
}

/// Pendulum fallback gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackParams {
    pub energy_gain: f64,
    pub kp: f64,
    pub kd: f64,
    /// PD law is used while `|cos(theta) - 1| <= switch_threshold`.
    pub switch_threshold: f64,
    /// Energy the swing law regulates to, in J.
    pub target_energy: f64,
}

impl Default for FallbackParams {
    fn default() -> Self {
        Self {
            energy_gain: 0.1,
            kp: 4.0,
            kd: 5.0,
            switch_threshold: 1.0,
            target_energy: 0.0,
        }
    }
}

fn check_gains(gains: &[f64], switch_threshold: f64) -> Result<()> {
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::InvalidConfig(
            "fallback gains must be finite and >= 0".into(),
        ));
    }
    if !(switch_threshold > 0.0 && switch_threshold < 2.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "switch threshold {switch_threshold} outside (0, 2)"
        )));
    }
    Ok(())
}

impl FallbackParams {
    pub fn validate(&self) -> Result<()> {
        check_gains(&[self.energy_gain, self.kp, self.kd], self.switch_threshold)
    }
}

/// Torque of the pendulum fallback at `state`.
pub fn pendulum_fallback(env: &Pendulum, state: &PendulumState, params: &FallbackParams) -> f64 {
    let max = env.params().max_torque;
    let u = if (libm::cos(state.theta) - 1.0).abs() <= params.switch_threshold {
        -params.kp * wrap_angle(state.theta) - params.kd * state.omega
    } else {
        params.energy_gain * state.omega * (params.target_energy - env.energy(state))
    };
    u.clamp(-max, max)
}

#[derive(Debug, Clone, Default)]
pub struct PendulumFallback {
    pub params: FallbackParams,
}

impl Policy<Pendulum> for PendulumFallback {
    fn act(&self, env: &Pendulum, state: &PendulumState) -> Result<f64> {
        Ok(pendulum_fallback(env, state, &self.params))
    }

    fn kind(&self) -> PolicyKind {
        PolicyKind::Fallback
    }
}

impl WithFallback for Pendulum {
    type Fallback = PendulumFallback;

    fn default_fallback(&self) -> PendulumFallback {
        PendulumFallback::default()
    }
}

/// Cart-pole fallback gains.
///
/// Swing phase: the commanded cart acceleration is
/// `k_e * theta_dot * cos(theta) * (E - E*) - k_x * x - k_xd * x_dot`, where
/// `E = theta_dot^2 / 2 + (g / l)(cos(theta) - 1)` is the pole energy per unit
/// `m_p l^2`; the force realising it is recovered from the cart equation.
/// Balance phase: `F = k . (x, x_dot, theta, theta_dot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleFallbackParams {
    pub energy_gain: f64,
    pub swing_x_gain: f64,
    pub swing_x_dot_gain: f64,
    /// Balance feedback on `(x, x_dot, wrapped theta, theta_dot)`.
    pub balance_gains: [f64; 4],
    pub switch_threshold: f64,
    pub target_energy: f64,
}

impl Default for CartPoleFallbackParams {
    fn default() -> Self {
        Self {
            energy_gain: 0.3,
            swing_x_gain: 2.0,
            swing_x_dot_gain: 2.0,
            // Discrete LQR on the upright linearisation, Q = diag(10, 1, 100, 1),
            // R = 0.1, rounded.
            balance_gains: [8.4, 10.1, 65.3, 13.5],
            switch_threshold: 0.2,
            target_energy: 0.0,
        }
    }
}

impl CartPoleFallbackParams {
    pub fn validate(&self) -> Result<()> {
        let mut gains = [0.0; 7];
        gains[..3].copy_from_slice(&[self.energy_gain, self.swing_x_gain, self.swing_x_dot_gain]);
        gains[3..].copy_from_slice(&self.balance_gains);
        check_gains(&gains, self.switch_threshold)
    }
}

pub fn cartpole_fallback(
    env: &CartPoleSwingup,
    s: &CartPoleState,
    params: &CartPoleFallbackParams,
) -> f64 {
    let p = env.params();
    let (sin, cos) = (libm::sin(s.theta), libm::cos(s.theta));
    let force = if (cos - 1.0).abs() <= params.switch_threshold {
        let k = &params.balance_gains;
        k[0] * s.x + k[1] * s.x_dot + k[2] * wrap_angle(s.theta) + k[3] * s.theta_dot
    } else {
        let energy = 0.5 * s.theta_dot * s.theta_dot + p.gravity / p.pole_length * (cos - 1.0);
        let x_ddot = params.energy_gain * s.theta_dot * cos * (energy - params.target_energy)
            - params.swing_x_gain * s.x
            - params.swing_x_dot_gain * s.x_dot;
        (p.cart_mass + p.pole_mass * sin * sin) * x_ddot
            - p.pole_mass * p.pole_length * s.theta_dot * s.theta_dot * sin
            + p.pole_mass * p.gravity * sin * cos
    };
    force.clamp(-p.max_force, p.max_force)
}

#[derive(Debug, Clone, Default)]
pub struct CartPoleFallback {
    pub params: CartPoleFallbackParams,
}

impl Policy<CartPoleSwingup> for CartPoleFallback {
    fn act(&self, env: &CartPoleSwingup, state: &CartPoleState) -> Result<f64> {
        Ok(cartpole_fallback(env, state, &self.params))
    }

    fn kind(&self) -> PolicyKind {
        PolicyKind::Fallback
    }
}

impl WithFallback for CartPoleSwingup {
    type Fallback = CartPoleFallback;

    fn default_fallback(&self) -> CartPoleFallback {
        CartPoleFallback::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pendulum_rest_gives_zero_torque() {
        let env = Pendulum::default();
        let u = pendulum_fallback(
            &env,
            &PendulumState::new(0.0, 0.0),
            &FallbackParams::default(),
        );
        assert_eq!(u, 0.0);
    }

    #[test]
    fn pendulum_pd_region() {
        let env = Pendulum::default();
        let params = FallbackParams {
            kp: 5.0,
            ..FallbackParams::default()
        };
        let u = pendulum_fallback(&env, &PendulumState::new(0.1, 0.0), &params);
        assert_abs_diff_eq!(u, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn pendulum_pd_law_is_odd() {
        let env = Pendulum::default();
        let p = FallbackParams::default();
        for &(th, om) in &[(0.2, 0.1), (-0.4, 0.9), (0.05, -1.3), (1.0, 0.0)] {
            let a = pendulum_fallback(&env, &PendulumState::new(th, om), &p);
            let b = pendulum_fallback(&env, &PendulumState::new(-th, -om), &p);
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn pendulum_energy_law_removes_energy() {
        // Outside the PD region the torque opposes omega, so E decreases.
        let env = Pendulum::default();
        let p = FallbackParams::default();
        let s = PendulumState::new(2.5, 1.0);
        let u = pendulum_fallback(&env, &s, &p);
        let energy = 0.5 / 3.0 * 1.0 + 5.0 * (1.0 - 2.5f64.cos());
        assert!(u < 0.0);
        assert_abs_diff_eq!(u, -p.energy_gain * energy, epsilon = 1e-12);
    }

    #[test]
    fn cartpole_rest_gives_zero_force() {
        let env = CartPoleSwingup::default();
        let s = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            cartpole_fallback(&env, &s, &CartPoleFallbackParams::default()),
            0.0
        );
    }

    #[test]
    fn cartpole_balance_pushes_towards_offset_first() {
        // A stabilising linear law on the cart-pole needs positive feedback on
        // x: the cart first moves away so the pole tips back towards the
        // centre. The closed-loop return to x = 0 is covered by the
        // integration tests.
        let env = CartPoleSwingup::default();
        let s = CartPoleState::new(1.0, 0.0, 0.0, 0.0);
        assert!(cartpole_fallback(&env, &s, &CartPoleFallbackParams::default()) > 0.0);
    }

    #[test]
    fn cartpole_swing_phase_centres_the_cart() {
        // Hanging pole at rest: zero energy error term, so only the cart PD acts.
        let env = CartPoleSwingup::default();
        let s = CartPoleState::new(1.0, 0.0, core::f64::consts::PI, 0.0);
        assert!(cartpole_fallback(&env, &s, &CartPoleFallbackParams::default()) < 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(FallbackParams::default().validate().is_ok());
        assert!(CartPoleFallbackParams::default().validate().is_ok());
        let bad = FallbackParams {
            kd: -1.0,
            ..FallbackParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = FallbackParams {
            switch_threshold: 2.0,
            ..FallbackParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
