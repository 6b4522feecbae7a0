//! Desk-scale training of base policies and critics.
//!
//! Policies are found by a cross-entropy search over the weights of a small
//! tanh network, which needs nothing but episode returns. Critics are then
//! regressed onto the policy's value with fitted TD(0). The wrapper does not
//! care how either was produced.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

mod cem;
mod critic;

pub use cem::{evaluate_policy, train_policy, IterationLog, TrainOutcome};
pub use critic::{fit_critic, CriticFit};

/// Evaluates population members; `score(i)` is pure, so any evaluation order
/// gives the same result.
pub trait PopulationEvaluator {
    fn evaluate(&self, n: usize, score: &(dyn Fn(usize) -> Result<f64> + Sync))
        -> Result<Vec<f64>>;
}

/// Evaluates candidates one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PopulationEvaluator for Sequential {
    fn evaluate(
        &self,
        n: usize,
        score: &(dyn Fn(usize) -> Result<f64> + Sync),
    ) -> Result<Vec<f64>> {
        (0..n).map(score).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckpointTag {
    Early,
    Mid,
    Late,
}

impl CheckpointTag {
    pub const ALL: [CheckpointTag; 3] = [
        CheckpointTag::Early,
        CheckpointTag::Mid,
        CheckpointTag::Late,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointTag::Early => "early",
            CheckpointTag::Mid => "mid",
            CheckpointTag::Late => "late",
        }
    }

    /// Fraction of the training iterations after which the tag is taken.
    pub fn fraction(self) -> f64 {
        match self {
            CheckpointTag::Early => 0.1,
            CheckpointTag::Mid => 0.5,
            CheckpointTag::Late => 1.0,
        }
    }

    /// Number of completed iterations at which the checkpoint is taken.
    pub fn iteration(self, total: usize) -> usize {
        if total == 0 {
            return 0;
        }
        let k = libm::ceil(self.fraction() * total as f64) as usize;
        k.clamp(1, total)
    }
}

impl fmt::Display for CheckpointTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckpointTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(CheckpointTag::Early),
            "mid" => Ok(CheckpointTag::Mid),
            "late" => Ok(CheckpointTag::Late),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown checkpoint tag `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Policy rollouts collected for the regression dataset.
    pub rollouts: usize,
    pub batch_size: usize,
    /// Minibatch sweeps over the dataset per TD target refresh.
    pub passes_per_epoch: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            epochs: 40,
            rollouts: 64,
            batch_size: 128,
            passes_per_epoch: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Discount of the critic's value target.
    pub gamma: f64,
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Episode length for policy search and critic rollouts.
    pub horizon: usize,
    /// Episodes averaged per candidate; all candidates of an iteration share
    /// the same initial states.
    pub episodes_per_candidate: usize,
    pub initial_std: f64,
    /// Floor on the per-weight search spread, so the search never freezes.
    pub min_std: f64,
    pub hidden: Vec<usize>,
    pub critic: CriticConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            population: 64,
            elite_fraction: 0.2,
            iterations: 40,
            horizon: 200,
            episodes_per_candidate: 8,
            initial_std: 0.1,
            min_std: 0.01,
            hidden: vec![64, 64],
            critic: CriticConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return bad("elite fraction must lie in (0, 1)");
        }
        if self.population < 2 || self.elite_count() == 0 {
            return bad("population too small for the elite fraction");
        }
        if self.horizon == 0 || self.episodes_per_candidate == 0 {
            return bad("horizon and episodes per candidate must be positive");
        }
        if !(self.initial_std > 0.0 && self.min_std >= 0.0) {
            return bad("search spreads must be positive");
        }
        let c = &self.critic;
        if !(c.learning_rate > 0.0) || c.batch_size == 0 || c.rollouts == 0 {
            return bad("critic needs a positive learning rate, batch size and rollout count");
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        libm::round(self.elite_fraction * self.population as f64) as usize
    }
}
