//! Critic-gated policy switching with goal-reaching guarantees.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! - [`env`]: the Pendulum and CartPoleSwingup dynamics, rewards, goal sets
//!   and initial-state samplers.
//! - [`policy`]: portable feed-forward networks, the energy + PD fallback
//!   controllers and handcrafted policies/critics used in tests.
//! - [`wrapper`]: the switching policy that gates a base policy behind its
//!   critic and falls back to a goal-reaching controller.
//! - [`theory`]: certificate quantities (overshoot, reaching times) and the
//!   reaching-time distribution of the random acceptances.
//! - [`trainer`]: desk-scale cross-entropy policy search and TD(0) critic
//!   regression.
//!
//! File formats, the experiment harness and the command line live in the
//! `calf-lab` crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod env;
mod error;
pub mod policy;
pub mod seed;
pub mod stats;
pub mod theory;
pub mod trainer;
pub mod wrapper;

pub use error::{Error, Result};
