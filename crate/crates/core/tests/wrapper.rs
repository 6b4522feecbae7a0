use calf_core::env::{CartPoleSwingup, Environment, Pendulum, PendulumState};
use calf_core::policy::{
    CartPoleFallback, ConstantPolicy, Critic, GoalDistanceCritic, PendulumFallback, Policy,
    PolicyKind,
};
use calf_core::wrapper::{
    run_episode, run_policy_episode, Decision, EpisodeOptions, TrialRecord, WrapperConfig,
    WrapperState,
};
use calf_core::Result;
use proptest::prelude::*;

/// Deliberately rough critic: rewards spinning fast.
struct SpinCritic;

impl Critic<Pendulum> for SpinCritic {
    fn value(&self, _: &Pendulum, s: &PendulumState) -> Result<f64> {
        Ok(s.omega.abs().min(5.0) - 0.1 * s.theta.cos())
    }
}

fn pendulum_run(cfg: &WrapperConfig) -> TrialRecord {
    run_episode(
        &Pendulum::default(),
        &ConstantPolicy(1.5),
        &SpinCritic,
        &PendulumFallback::default(),
        cfg,
        EpisodeOptions::default(),
    )
    .unwrap()
}

fn arb_config() -> impl Strategy<Value = WrapperConfig> {
    (
        0.001f64..0.5,
        0.5f64..0.9999,
        0.0f64..=1.0,
        any::<bool>(),
        1usize..300,
        any::<u64>(),
    )
        .prop_map(
            |(nu, lambda, p_relax, guard, horizon, seed)| WrapperConfig {
                nu,
                lambda,
                p_relax,
                theorem2_guard: guard,
                horizon,
                seed,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bookkeeping_invariants(cfg in arb_config()) {
        let rec = pendulum_run(&cfg);
        prop_assert_eq!(rec.log.len(), cfg.horizon);
        prop_assert_eq!(rec.steps_completed, cfg.horizon);
        let c = rec.counters;
        prop_assert_eq!(c.n_base + c.n_fallback, cfg.horizon as u64);
        prop_assert_eq!(c.n_base, c.n_v_dagger + c.n_rho);
        let count = |d: Decision| rec.log.iter().filter(|s| s.decision == d).count() as u64;
        prop_assert_eq!(count(Decision::BaseImprove), c.n_v_dagger);
        prop_assert_eq!(count(Decision::BaseRandom), c.n_rho);
        prop_assert_eq!(count(Decision::Fallback), c.n_fallback);
        prop_assert_eq!(count(Decision::Base), 0);

        let mut prev = rec.v_initial;
        for s in &rec.log {
            // V_dagger never decreases and only moves on improvement steps.
            prop_assert!(s.v_dagger >= prev);
            prop_assert_eq!(s.v_dagger != prev, s.decision == Decision::BaseImprove);
            if s.decision == Decision::BaseImprove {
                prop_assert!(s.v_now >= prev + cfg.nu);
                prop_assert_eq!(s.v_dagger, s.v_now);
            } else {
                prop_assert!(s.v_now < prev + cfg.nu);
            }
            if s.decision == Decision::BaseRandom {
                prop_assert!(s.u < s.rho);
            }
            if s.decision == Decision::Fallback {
                prop_assert!(s.u >= s.rho);
            }
            prop_assert!(s.action.abs() <= 2.0);
            prop_assert!((0.0..1.0).contains(&s.u));
            prev = s.v_dagger;
        }
        let last = rec.log.iter().rev().find(|s| s.decision.is_base()).map(|s| s.t);
        prop_assert_eq!(last, rec.last_base_step);
    }

    #[test]
    fn conservative_mode_never_accepts_at_random(cfg in arb_config()) {
        let cfg = WrapperConfig { p_relax: 0.0, ..cfg };
        let rec = pendulum_run(&cfg);
        prop_assert_eq!(rec.counters.n_rho, 0);
        prop_assert!(rec.log.iter().all(|s| s.rho == 0.0));
    }

    #[test]
    fn guard_blocks_acceptance_below_the_initial_value(cfg in arb_config()) {
        let cfg = WrapperConfig { theorem2_guard: true, ..cfg };
        let rec = pendulum_run(&cfg);
        for s in &rec.log {
            if s.v_now < rec.v_initial {
                prop_assert_eq!(s.rho, 0.0);
                prop_assert!(s.decision != Decision::BaseRandom);
            }
        }
    }

    #[test]
    fn runs_are_reproducible(cfg in arb_config()) {
        prop_assert_eq!(pendulum_run(&cfg), pendulum_run(&cfg));
    }

    #[test]
    fn improvement_count_respects_critic_bound(seed in any::<u64>(), nu in 0.01f64..0.3) {
        let env = Pendulum::default();
        let cfg = WrapperConfig { nu, lambda: 0.99, p_relax: 0.95, horizon: 2000, seed, ..WrapperConfig::default() };
        let critic = GoalDistanceCritic::default();
        let rec = run_episode(&env, &ConstantPolicy(2.0), &critic, &PendulumFallback::default(), &cfg,
                              EpisodeOptions::SUMMARY_ONLY).unwrap();
        let bound = ((Critic::<Pendulum>::upper_bound(&critic).unwrap() - rec.v_initial) / nu).ceil();
        prop_assert!(rec.counters.n_v_dagger as f64 <= bound);
    }
}

#[test]
fn recorded_states_follow_the_dynamics() {
    let env = Pendulum::default();
    let rec = pendulum_run(&WrapperConfig {
        p_relax: 0.5,
        horizon: 100,
        seed: 3,
        ..WrapperConfig::default()
    });
    for s in &rec.log {
        let t = s.t as usize;
        let cur = env.state_from_slice(rec.state(t).unwrap()).unwrap();
        let next = env.state_from_slice(rec.state(t + 1).unwrap()).unwrap();
        assert_eq!(env.step(&cur, s.action).unwrap(), next);
        assert_eq!(env.goal_distance(&cur), s.goal_distance);
        assert_eq!(env.reward(&cur, s.action), s.reward);
    }
    let total: f64 = rec.log.iter().map(|s| s.reward).sum();
    assert!((total - rec.cumulative_reward).abs() < 1e-9);
}

#[test]
fn decisions_choose_the_matching_policy() {
    let env = Pendulum::default();
    let fallback = PendulumFallback::default();
    let rec = pendulum_run(&WrapperConfig {
        p_relax: 0.7,
        lambda: 0.99,
        horizon: 150,
        seed: 8,
        ..WrapperConfig::default()
    });
    for s in &rec.log {
        let cur = env
            .state_from_slice(rec.state(s.t as usize).unwrap())
            .unwrap();
        let expected = if s.decision.is_base() {
            1.5
        } else {
            fallback.act(&env, &cur).unwrap()
        };
        assert_eq!(s.action, expected);
    }
}

#[test]
fn wrapper_state_from_the_outside() {
    let cfg = WrapperConfig {
        p_relax: 1.0,
        lambda: 0.5,
        ..WrapperConfig::default()
    };
    let mut ws = WrapperState::new(0.0, calf_core::wrapper::uniform_stream(0));
    // rho_0 = 1 accepts whatever U_0 is.
    assert_eq!(ws.decide(&cfg, -1.0).decision, Decision::BaseRandom);
    assert_eq!(ws.t(), 1);
    assert_eq!(
        ws.decide_with_uniform(&cfg, -1.0, 0.6).decision,
        Decision::Fallback
    );
    assert_eq!(
        ws.decide_with_uniform(&cfg, 0.02, 0.99).decision,
        Decision::BaseImprove
    );
    assert_eq!(ws.v_dagger(), 0.02);
    assert_eq!(ws.counters().n_base, 2);
}

#[test]
fn fixed_policy_runs() {
    let env = CartPoleSwingup::default();
    let fb = CartPoleFallback::default();
    assert_eq!(Policy::<CartPoleSwingup>::kind(&fb), PolicyKind::Fallback);
    let rec = run_policy_episode(
        &env,
        &fb,
        Decision::Fallback,
        4,
        300,
        EpisodeOptions::default(),
    )
    .unwrap();
    assert_eq!(rec.counters.n_fallback, rec.steps_completed as u64);
    assert_eq!(rec.last_base_step, None);
    assert!(rec.log.iter().all(|s| s.v_now.is_nan() && s.rho.is_nan()));
    assert!(rec.v_initial.is_nan());
}

#[test]
fn termination_stops_the_episode() {
    let env = CartPoleSwingup::default();
    let rec = run_policy_episode(
        &env,
        &ConstantPolicy(10.0),
        Decision::Base,
        1,
        1000,
        EpisodeOptions::default(),
    )
    .unwrap();
    assert!(rec.terminated);
    assert!(!rec.goal_reached);
    assert!(rec.steps_completed < 1000);
    assert_eq!(rec.log.len(), rec.steps_completed);
    assert_eq!(rec.goal_distances.len(), rec.steps_completed + 1);
    let last = env
        .state_from_slice(rec.state(rec.steps_completed).unwrap())
        .unwrap();
    assert!(env.is_terminated(&last));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = WrapperConfig {
        lambda: 1.5,
        ..WrapperConfig::default()
    };
    let err = run_episode(
        &Pendulum::default(),
        &ConstantPolicy(0.0),
        &GoalDistanceCritic::default(),
        &PendulumFallback::default(),
        &bad,
        EpisodeOptions::default(),
    );
    assert!(err.is_err());
}

struct FlatCritic;

impl Critic<Pendulum> for FlatCritic {
    fn value(&self, _: &Pendulum, _: &PendulumState) -> Result<f64> {
        Ok(-1.0)
    }
}

#[test]
fn flat_critic_without_relaxation_is_the_fallback() {
    let env = Pendulum::default();
    let fb = PendulumFallback::default();
    for seed in 0..5 {
        let cfg = WrapperConfig {
            seed,
            ..WrapperConfig::default()
        };
        let wrapped = run_episode(
            &env,
            &ConstantPolicy(2.0),
            &FlatCritic,
            &fb,
            &cfg,
            EpisodeOptions::default(),
        )
        .unwrap();
        let alone = run_policy_episode(
            &env,
            &fb,
            Decision::Fallback,
            seed,
            200,
            EpisodeOptions::default(),
        )
        .unwrap();
        assert_eq!(wrapped.counters.n_fallback, 200);
        assert_eq!(wrapped.trajectory, alone.trajectory);
        assert_eq!(wrapped.cumulative_reward, alone.cumulative_reward);
    }
}

#[test]
fn full_trust_tracks_the_base_policy() {
    let env = Pendulum::default();
    let fb = PendulumFallback::default();
    let base = ConstantPolicy(1.5);
    for (lambda, full) in [(1.0 - 1e-9, true), (0.9999, false)] {
        for seed in 0..5 {
            let cfg = WrapperConfig {
                p_relax: 1.0,
                lambda,
                seed,
                ..WrapperConfig::default()
            };
            let wrapped = run_episode(
                &env,
                &base,
                &SpinCritic,
                &fb,
                &cfg,
                EpisodeOptions::default(),
            )
            .unwrap();
            let alone = run_policy_episode(
                &env,
                &base,
                Decision::Base,
                seed,
                200,
                EpisodeOptions::default(),
            )
            .unwrap();
            let prefix = wrapped
                .log
                .iter()
                .take_while(|s| s.decision.is_base())
                .count();
            assert!(prefix > 0);
            let d = env.descriptor().state_dim;
            assert_eq!(
                wrapped.trajectory[..(prefix + 1) * d],
                alone.trajectory[..(prefix + 1) * d]
            );
            if full {
                assert_eq!(prefix, 200);
                assert_eq!(wrapped.cumulative_reward, alone.cumulative_reward);
            }
        }
    }
}
