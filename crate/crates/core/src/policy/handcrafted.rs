use super::{Critic, Policy, PolicyKind};
use crate::env::Environment;
use crate::Result;

/// Applies the same action every step (clamped to the bounds). With a
/// nonzero action it never settles the pendulum, which makes it a useful
/// adversarial base policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy(pub f64);

impl<E: Environment + ?Sized> Policy<E> for ConstantPolicy {
    fn act(&self, env: &E, _state: &E::State) -> Result<f64> {
        Ok(env.descriptor().clamp_action(self.0))
    }

    fn kind(&self) -> PolicyKind {
        PolicyKind::Handcrafted
    }
}

/// `V(s) = -scale * goal_distance(s)`.
///
/// Continuous, bounded above by 0 (attained on the whole goal set) and with
/// bounded superlevel sets whenever every unbounded state component is a goal
/// feature, which holds for both benchmarks once angles are wrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalDistanceCritic {
    pub scale: f64,
}

impl Default for GoalDistanceCritic {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl<E: Environment + ?Sized> Critic<E> for GoalDistanceCritic {
    fn value(&self, env: &E, state: &E::State) -> Result<f64> {
        Ok(-self.scale * env.goal_distance(state))
    }

    fn upper_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}
