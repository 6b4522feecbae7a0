//! Coarse grid search over the pendulum fallback gains.
//!
//! Candidates are ranked by goal-reach count over a fixed seed set, then by
//! mean cumulative reward. The frozen defaults in `calf-core` were picked
//! from [`pendulum_grid`] with [`tune_pendulum_fallback`].

use calf_core::env::Pendulum;
use calf_core::policy::{FallbackParams, PendulumFallback};
use calf_core::wrapper::{run_policy_episode, Decision, EpisodeOptions};
use rayon::prelude::*;

pub const ENERGY_GAINS: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];
pub const KP: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const KD: [f64; 4] = [0.5, 1.0, 3.0, 5.0];
pub const SWITCH: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub params: FallbackParams,
    pub reached: usize,
    pub mean_reward: f64,
}

pub fn pendulum_grid() -> Vec<FallbackParams> {
    let mut out = Vec::new();
    for &energy_gain in &ENERGY_GAINS {
        for &kp in &KP {
            for &kd in &KD {
                for &switch_threshold in &SWITCH {
                    out.push(FallbackParams {
                        energy_gain,
                        kp,
                        kd,
                        switch_threshold,
                        ..FallbackParams::default()
                    });
                }
            }
        }
    }
    out
}

pub fn evaluate_pendulum_fallback(
    env: &Pendulum,
    params: FallbackParams,
    seeds: &[u64],
    horizon: usize,
) -> anyhow::Result<TuneResult> {
    params.validate()?;
    let policy = PendulumFallback { params };
    let mut reached = 0;
    let mut total = 0.0;
    for &s in seeds {
        let rec = run_policy_episode(
            env,
            &policy,
            Decision::Fallback,
            s,
            horizon,
            EpisodeOptions::SUMMARY_ONLY,
        )?;
        reached += usize::from(rec.goal_reached);
        total += rec.cumulative_reward;
    }
    Ok(TuneResult {
        params,
        reached,
        mean_reward: total / seeds.len() as f64,
    })
}

/// Evaluates every candidate; best first.
pub fn tune_pendulum_fallback(
    env: &Pendulum,
    grid: &[FallbackParams],
    seeds: &[u64],
    horizon: usize,
) -> anyhow::Result<Vec<TuneResult>> {
    let mut results = grid
        .par_iter()
        .map(|p| evaluate_pendulum_fallback(env, *p, seeds, horizon))
        .collect::<anyhow::Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        b.reached
            .cmp(&a.reached)
            .then(b.mean_reward.total_cmp(&a.mean_reward))
    });
    Ok(results)
}
