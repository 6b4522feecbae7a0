//! Policies and critics.
//!
//! Networks consume observations; fallback controllers read the raw state.
//! Both go through the same [`Policy`] interface, which hands the
//! environment to the policy so it can build whichever input it needs.

use crate::env::Environment;
use crate::Result;

mod fallback;
mod handcrafted;
mod network;

pub use fallback::{
    cartpole_fallback, pendulum_fallback, CartPoleFallback, CartPoleFallbackParams, FallbackParams,
    PendulumFallback, WithFallback,
};
pub use handcrafted::{ConstantPolicy, GoalDistanceCritic};
pub use network::{
    ActionTransform, Activation, Layer, NetworkCritic, NetworkPolicy, OutputRole, PortableNetwork,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Network,
    Fallback,
    Handcrafted,
}

/// A deterministic stationary policy with a scalar action.
pub trait Policy<E: Environment + ?Sized>: Sync {
    /// Action for `state`, already inside the environment's action bounds.
    fn act(&self, env: &E, state: &E::State) -> Result<f64>;

    fn kind(&self) -> PolicyKind;
}

/// A state-value estimate used to gate the base policy.
pub trait Critic<E: Environment + ?Sized>: Sync {
    fn value(&self, env: &E, state: &E::State) -> Result<f64>;

    /// A known `sup` of the critic over the whole state space, if one exists.
    fn upper_bound(&self) -> Option<f64> {
        None
    }
}

impl<E: Environment + ?Sized, P: Policy<E> + ?Sized> Policy<E> for &P {
    fn act(&self, env: &E, state: &E::State) -> Result<f64> {
        (**self).act(env, state)
    }

    fn kind(&self) -> PolicyKind {
        (**self).kind()
    }
}

impl<E: Environment + ?Sized, C: Critic<E> + ?Sized> Critic<E> for &C {
    fn value(&self, env: &E, state: &E::State) -> Result<f64> {
        (**self).value(env, state)
    }

    fn upper_bound(&self) -> Option<f64> {
        (**self).upper_bound()
    }
}
