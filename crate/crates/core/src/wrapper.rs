//! Critic-gated switching between a base policy and a fallback policy.
//!
//! At every step `t` a uniform `U_t` is drawn and the critic value
//! `v = V(S_t)` is compared against the best value seen so far, `V_dagger`:
//!
//! - `v >= V_dagger + nu`: the base action is taken and `V_dagger <- v`;
//! - otherwise, if `U_t < rho_t(S_t)`: the base action is taken anyway;
//! - otherwise the fallback acts.
//!
//! `rho_t = lambda^t * p_relax` is summable, so random acceptances stop
//! almost surely, and a bounded critic can only improve by `nu` finitely
//! often: from some step on only the fallback acts.
//!
//! `U_t` is consumed on every step, including improvement steps, so the
//! uniform stream is a function of the seed alone. That lets callers replay
//! the same draws (for instance to compute the last random acceptance time
//! ahead of an episode).

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::env::{Environment, GOAL_WINDOW};
use crate::policy::{Critic, Policy};
use crate::seed::{self, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapperConfig {
    /// Minimum critic improvement that counts, `> 0`.
    pub nu: f64,
    /// Decay of the acceptance probability, in `(0, 1)`.
    pub lambda: f64,
    /// Initial acceptance probability, in `[0, 1]`.
    pub p_relax: f64,
    /// Forbid random acceptances at states valued below the initial state.
    pub theorem2_guard: bool,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        Self {
            nu: 0.01,
            lambda: 0.9999,
            p_relax: 0.0,
            theorem2_guard: false,
            horizon: 200,
            seed: 0,
        }
    }
}

impl WrapperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "nu = {} must be > 0",
                self.nu
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "lambda = {} must lie in (0, 1)",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.p_relax) {
            return Err(Error::InvalidConfig(alloc::format!(
                "p_relax = {} must lie in [0, 1]",
                self.p_relax
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Summable majorant `lambda^t * p_relax`.
pub fn rho_bar(lambda: f64, p_relax: f64, t: u64) -> f64 {
    if p_relax == 0.0 {
        return 0.0;
    }
    p_relax * libm::pow(lambda, t as f64)
}

/// Probability of accepting the base action without a critic improvement.
pub fn acceptance_probability(cfg: &WrapperConfig, t: u64, v_now: f64, v_initial: f64) -> f64 {
    if cfg.theorem2_guard && v_now < v_initial {
        return 0.0;
    }
    rho_bar(cfg.lambda, cfg.p_relax, t)
}

/// The uniform stream a wrapper episode with this seed consumes.
pub fn uniform_stream(seed: u64) -> StreamRng {
    seed::stream(seed, seed::STREAM_WRAPPER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// Critic improved by at least `nu`; base acts and `V_dagger` moves up.
    BaseImprove,
    /// No improvement but the random acceptance fired; base acts.
    BaseRandom,
    Fallback,
    /// Unconditional base action (base-only runs).
    Base,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::BaseImprove => "base-improve",
            Decision::BaseRandom => "base-random",
            Decision::Fallback => "fallback",
            Decision::Base => "base",
        }
    }

    pub fn is_base(self) -> bool {
        !matches!(self, Decision::Fallback)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base-improve" => Ok(Decision::BaseImprove),
            "base-random" => Ok(Decision::BaseRandom),
            "fallback" => Ok(Decision::Fallback),
            "base" => Ok(Decision::Base),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown decision `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub decision: Decision,
    pub rho: f64,
    pub u: f64,
    /// `V_dagger` after this step's update.
    pub v_dagger: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Critic improvements (`base-improve` decisions).
    pub n_v_dagger: u64,
    /// Random acceptances (`base-random` decisions).
    pub n_rho: u64,
    /// Steps on which the base policy acted.
    pub n_base: u64,
    pub n_fallback: u64,
}

impl Counters {
    fn record(&mut self, d: Decision) {
        match d {
            Decision::BaseImprove => self.n_v_dagger += 1,
            Decision::BaseRandom => self.n_rho += 1,
            _ => {}
        }
        if d.is_base() {
            self.n_base += 1;
        } else {
            self.n_fallback += 1;
        }
    }
}

/// Running state of one wrapper episode.
#[derive(Debug, Clone)]
pub struct WrapperState {
    t: u64,
    v_dagger: f64,
    v_initial: f64,
    rng: StreamRng,
    counters: Counters,
    last_base: Option<u64>,
}

impl WrapperState {
    /// `v_initial` is the critic value of the initial state; it seeds
    /// `V_dagger`.
    pub fn new(v_initial: f64, rng: StreamRng) -> Self {
        Self {
            t: 0,
            v_dagger: v_initial,
            v_initial,
            rng,
            counters: Counters::default(),
            last_base: None,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn v_dagger(&self) -> f64 {
        self.v_dagger
    }

    pub fn v_initial(&self) -> f64 {
        self.v_initial
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn last_base_step(&self) -> Option<u64> {
        self.last_base
    }

    /// Draws `U_t` and decides.
    pub fn decide(&mut self, cfg: &WrapperConfig, v_now: f64) -> StepDecision {
        let u = self.rng.random::<f64>();
        self.decide_with_uniform(cfg, v_now, u)
    }

    pub fn decide_with_uniform(&mut self, cfg: &WrapperConfig, v_now: f64, u: f64) -> StepDecision {
        let rho = acceptance_probability(cfg, self.t, v_now, self.v_initial);
        self.apply(cfg.nu, v_now, u, rho)
    }

    /// The branch logic with `U_t` and `rho_t` supplied by the caller.
    /// Advances the step counter.
    pub fn apply(&mut self, nu: f64, v_now: f64, u: f64, rho: f64) -> StepDecision {
        let decision = if v_now >= self.v_dagger + nu {
            self.v_dagger = v_now;
            Decision::BaseImprove
        } else if u < rho {
            Decision::BaseRandom
        } else {
            Decision::Fallback
        };
        self.counters.record(decision);
        if decision.is_base() {
            self.last_base = Some(self.t);
        }
        self.t += 1;
        StepDecision {
            decision,
            rho,
            u,
            v_dagger: self.v_dagger,
        }
    }
}

/// What to keep from an episode beyond the summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOptions {
    pub record_steps: bool,
    pub record_trajectory: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            record_steps: true,
            record_trajectory: true,
        }
    }
}

impl EpisodeOptions {
    pub const SUMMARY_ONLY: Self = Self {
        record_steps: false,
        record_trajectory: false,
    };
}

/// One row of the decision log. Fields that only exist under the wrapper are
/// `NaN` in fixed-policy runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub t: u64,
    pub decision: Decision,
    pub v_now: f64,
    pub v_dagger: f64,
    pub rho: f64,
    pub u: f64,
    pub action: f64,
    pub reward: f64,
    /// Goal distance of the state the decision was made in.
    pub goal_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub horizon: usize,
    pub steps_completed: usize,
    pub initial_state: Vec<f64>,
    pub state_dim: usize,
    /// States `S_0 ..= S_T`, flattened; empty unless requested.
    pub trajectory: Vec<f64>,
    pub log: Vec<StepLog>,
    /// `goal_distance(S_t)` for `t = 0 ..= T`; always recorded.
    pub goal_distances: Vec<f64>,
    pub cumulative_reward: f64,
    pub goal_reached: bool,
    pub terminated: bool,
    pub counters: Counters,
    pub last_base_step: Option<u64>,
    /// Critic value of `S_0` (`NaN` without a critic).
    pub v_initial: f64,
}

impl TrialRecord {
    pub fn state(&self, t: usize) -> Option<&[f64]> {
        let d = self.state_dim;
        self.trajectory.get(t * d..(t + 1) * d)
    }

    /// Largest goal distance over `S_t` for `t >= from` (`None` if the
    /// episode ended before `from`).
    pub fn max_goal_distance_from(&self, from: usize) -> Option<f64> {
        let tail = self.goal_distances.get(from..)?;
        if tail.is_empty() {
            return None;
        }
        Some(tail.iter().copied().fold(0.0, f64::max))
    }
}

struct Choice {
    decision: Decision,
    action: f64,
    v_now: f64,
    v_dagger: f64,
    rho: f64,
    u: f64,
}

fn rollout<E, F>(
    env: &E,
    s0: E::State,
    seed: u64,
    horizon: usize,
    opts: EpisodeOptions,
    v_initial: f64,
    mut choose: F,
) -> Result<(TrialRecord, Counters, Option<u64>)>
where
    E: Environment + ?Sized,
    F: FnMut(u64, &E::State) -> Result<Choice>,
{
    let state_dim = env.descriptor().state_dim;
    let initial_state = env.state_to_vec(&s0);
    let mut rec = TrialRecord {
        seed,
        horizon,
        steps_completed: 0,
        initial_state: initial_state.clone(),
        state_dim,
        trajectory: Vec::new(),
        log: Vec::new(),
        goal_distances: Vec::with_capacity(horizon + 1),
        cumulative_reward: 0.0,
        goal_reached: false,
        terminated: false,
        counters: Counters::default(),
        last_base_step: None,
        v_initial,
    };
    if opts.record_trajectory {
        rec.trajectory.reserve((horizon + 1) * state_dim);
        rec.trajectory.extend_from_slice(&initial_state);
    }
    if opts.record_steps {
        rec.log.reserve(horizon);
    }
    let mut counters = Counters::default();
    let mut last_base = None;
    let mut state = s0;
    let mut distance = env.goal_distance(&state);
    rec.goal_distances.push(distance);
    let mut streak = 0usize;
    for t in 0..horizon as u64 {
        let c = choose(t, &state).map_err(|e| e.at_step(t))?;
        let reward = env.reward(&state, c.action);
        let next = env.step(&state, c.action).map_err(|e| e.at_step(t))?;
        counters.record(c.decision);
        if c.decision.is_base() {
            last_base = Some(t);
        }
        if opts.record_steps {
            rec.log.push(StepLog {
                t,
                decision: c.decision,
                v_now: c.v_now,
                v_dagger: c.v_dagger,
                rho: c.rho,
                u: c.u,
                action: c.action,
                reward,
                goal_distance: distance,
            });
        }
        rec.cumulative_reward += reward;
        rec.steps_completed += 1;
        state = next;
        distance = env.goal_distance(&state);
        rec.goal_distances.push(distance);
        if opts.record_trajectory {
            rec.trajectory.extend(env.state_to_vec(&state));
        }
        streak = if distance == 0.0 { streak + 1 } else { 0 };
        if env.is_terminated(&state) {
            rec.terminated = true;
            break;
        }
    }
    rec.goal_reached = !rec.terminated && streak >= GOAL_WINDOW;
    Ok((rec, counters, last_base))
}

/// Runs the wrapper from an initial state sampled with `cfg.seed`.
pub fn run_episode<E, B, C, F>(
    env: &E,
    base: &B,
    critic: &C,
    fallback: &F,
    cfg: &WrapperConfig,
    opts: EpisodeOptions,
) -> Result<TrialRecord>
where
    E: Environment + ?Sized,
    B: Policy<E> + ?Sized,
    C: Critic<E> + ?Sized,
    F: Policy<E> + ?Sized,
{
    let s0 = initial_state(env, cfg.seed);
    run_episode_from(env, s0, base, critic, fallback, cfg, opts)
}

/// The initial state an episode with `seed` starts from.
pub fn initial_state<E: Environment + ?Sized>(env: &E, seed: u64) -> E::State {
    let mut rng = seed::stream(seed, seed::STREAM_INITIAL_STATE);
    env.sample_initial(&mut rng)
}

pub fn run_episode_from<E, B, C, F>(
    env: &E,
    s0: E::State,
    base: &B,
    critic: &C,
    fallback: &F,
    cfg: &WrapperConfig,
    opts: EpisodeOptions,
) -> Result<TrialRecord>
where
    E: Environment + ?Sized,
    B: Policy<E> + ?Sized,
    C: Critic<E> + ?Sized,
    F: Policy<E> + ?Sized,
{
    cfg.validate()?;
    let v0 = critic.value(env, &s0).map_err(|e| e.at_step(0))?;
    let mut ws = WrapperState::new(v0, uniform_stream(cfg.seed));
    let (mut rec, _, _) = rollout(env, s0, cfg.seed, cfg.horizon, opts, v0, |_, s| {
        let v_now = critic.value(env, s)?;
        let d = ws.decide(cfg, v_now);
        let action = if d.decision.is_base() {
            base.act(env, s)?
        } else {
            fallback.act(env, s)?
        };
        Ok(Choice {
            decision: d.decision,
            action,
            v_now,
            v_dagger: d.v_dagger,
            rho: d.rho,
            u: d.u,
        })
    })?;
    rec.counters = ws.counters();
    rec.last_base_step = ws.last_base_step();
    Ok(rec)
}

/// Runs a single policy for the whole episode. `label` is logged as the
/// decision of every step (`Base` or `Fallback`).
pub fn run_policy_episode<E, P>(
    env: &E,
    policy: &P,
    label: Decision,
    seed: u64,
    horizon: usize,
    opts: EpisodeOptions,
) -> Result<TrialRecord>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    let s0 = initial_state(env, seed);
    run_policy_episode_from(env, s0, policy, label, seed, horizon, opts)
}

pub fn run_policy_episode_from<E, P>(
    env: &E,
    s0: E::State,
    policy: &P,
    label: Decision,
    seed: u64,
    horizon: usize,
    opts: EpisodeOptions,
) -> Result<TrialRecord>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    let (mut rec, counters, last_base) =
        rollout(env, s0, seed, horizon, opts, f64::NAN, |_, s| {
            Ok(Choice {
                decision: label,
                action: policy.act(env, s)?,
                v_now: f64::NAN,
                v_dagger: f64::NAN,
                rho: f64::NAN,
                u: f64::NAN,
            })
        })?;
    rec.counters = counters;
    rec.last_base_step = last_base;
    Ok(rec)
}
