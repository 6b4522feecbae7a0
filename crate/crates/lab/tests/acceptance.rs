//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use calf_core::env::{CartPoleState, CartPoleSwingup, Environment, Pendulum, PendulumState};
use calf_core::policy::{
    ConstantPolicy, GoalDistanceCritic, NetworkCritic, NetworkPolicy, PendulumFallback,
};
use calf_core::seed::{self, child_seed};
use calf_core::stats::pooled_std;
use calf_core::theory::{
    certify, corollary_lower_bound, reaching_time_cdf, reaching_time_cdf_table, sample_t_rho_bar,
    CertifyConfig,
};
use calf_core::trainer::{CheckpointTag, TrainConfig};
use calf_core::wrapper::{run_episode, EpisodeOptions, WrapperConfig};
use calf_lab::certify::{reach_check, ReachCheckConfig};
use calf_lab::config::{ExperimentConfig, Mode};
use calf_lab::experiment::run_modes;
use calf_lab::train::train;
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2} s of {} s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn ac1_corollary() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut points = 0;
    for lambda in [0.5, 0.9, 0.99, 0.9999] {
        for p in [0.5, 0.95, 1.0] {
            let cdf = reaching_time_cdf_table(lambda, p, 50).unwrap();
            for t in 1..=50 {
                let bound = corollary_lower_bound(lambda, p, t).unwrap();
                let cdf = cdf[t as usize];
                points += 1;
                if bound > cdf {
                    violations += 1;
                }
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(1), start.elapsed());
    outcome(
        violations == 0 && fast,
        format!("{violations} violations over {points} points, {time}"),
    )
}

fn ac2_reaching_law() -> Outcome {
    let start = Instant::now();
    let (lambda, p, n, t_max) = (0.9, 0.5, 100_000usize, 100usize);
    let mut rng = seed::stream(2024, seed::STREAM_AUX);
    let mut counts = vec![0usize; t_max + 1];
    for _ in 0..n {
        let t = sample_t_rho_bar(lambda, p, &mut rng).unwrap() as usize;
        if t <= t_max {
            counts[t] += 1;
        }
    }
    let mut cum = 0usize;
    let mut worst: f64 = 0.0;
    for (t, c) in counts.iter().enumerate() {
        cum += c;
        let empirical = cum as f64 / n as f64;
        worst = worst.max((empirical - reaching_time_cdf(lambda, p, t as u64).unwrap()).abs());
    }
    let (fast, time) = within(Duration::from_secs(30), start.elapsed());
    outcome(
        worst <= 0.01 && fast,
        format!("max |F_emp - F| = {worst:.4} over t <= {t_max} (tol 0.01), {time}"),
    )
}

fn ac3_finiteness() -> Outcome {
    let start = Instant::now();
    let env = Pendulum::default();
    let critic = GoalDistanceCritic::default();
    let v_bar = 0.0;
    let (horizon, nu) = (20_000, 0.01);
    let results: Vec<(Option<u64>, u64, u64)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let cfg = WrapperConfig {
                nu,
                lambda: 0.99,
                p_relax: 0.95,
                theorem2_guard: false,
                horizon,
                seed: child_seed(3, k),
            };
            let rec = run_episode(
                &env,
                &ConstantPolicy(2.0),
                &critic,
                &PendulumFallback::default(),
                &cfg,
                EpisodeOptions::SUMMARY_ONLY,
            )
            .unwrap();
            let bound = ((v_bar - rec.v_initial) / nu).ceil() as u64;
            (rec.last_base_step, rec.counters.n_v_dagger, bound)
        })
        .collect();
    // A last base decision in the first half of the run, followed only by
    // fallback steps, witnesses that base decisions stopped.
    let finite = results
        .iter()
        .filter(|(last, _, _)| last.is_none_or(|t| t < horizon as u64 / 2))
        .count();
    let bounded = results.iter().filter(|(_, n, b)| n <= b).count();
    let latest = results.iter().filter_map(|r| r.0).max().unwrap_or(0);
    let (fast, time) = within(Duration::from_secs(120), start.elapsed());
    outcome(
        finite == 100 && bounded == 100 && fast,
        format!(
            "{finite}/100 runs stop using the base policy (latest base step {latest}), \
             {bounded}/100 satisfy N_V <= ceil((V_bar - V(s0)) / nu), {time}"
        ),
    )
}

struct DeskModels {
    policy: NetworkPolicy,
    critic: NetworkCritic,
    seconds: f64,
}

fn desk_models() -> &'static DeskModels {
    static MODELS: OnceLock<DeskModels> = OnceLock::new();
    MODELS.get_or_init(|| {
        let start = Instant::now();
        let trained = train(&Pendulum::default(), &TrainConfig::default(), true).unwrap();
        DeskModels {
            policy: NetworkPolicy(trained.outcome.checkpoint(CheckpointTag::Late).clone()),
            critic: NetworkCritic(trained.critic(CheckpointTag::Late).unwrap().network.clone()),
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn ac4_conservative_safety() -> Outcome {
    let m = desk_models();
    let start = Instant::now();
    let cfg = ExperimentConfig {
        modes: vec![Mode::Conservative, Mode::FallbackOnly],
        trials: 30,
        horizon: Some(1000),
        ..ExperimentConfig::default()
    };
    let out = run_modes(&Pendulum::default(), Some(&m.policy), Some(&m.critic), &cfg).unwrap();
    let cons = out.mode(Mode::Conservative).unwrap();
    let fb = out.mode(Mode::FallbackOnly).unwrap();
    let n_rho: u64 = cons.records.iter().map(|r| r.counters.n_rho).sum();
    let (fast, time) = within(Duration::from_secs(60), start.elapsed());
    outcome(
        cons.reached() == 30 && cons.reached() >= fb.reached() && n_rho == 0 && fast,
        format!(
            "conservative reached {}/30, fallback-only {}/30, N_rho = {n_rho}, {time} \
             (desk training took {:.1} s)",
            cons.reached(),
            fb.reached(),
            m.seconds
        ),
    )
}

fn ac5_mode_ordering() -> Outcome {
    let m = desk_models();
    let cfg = ExperimentConfig {
        modes: vec![Mode::Conservative, Mode::Brave, Mode::BaseOnly],
        trials: 30,
        ..ExperimentConfig::default()
    };
    let out = run_modes(&Pendulum::default(), Some(&m.policy), Some(&m.critic), &cfg).unwrap();
    let cons = out.mode(Mode::Conservative).unwrap();
    let brave = out.mode(Mode::Brave).unwrap();
    let base = out.mode(Mode::BaseOnly).unwrap();
    let (rc, rb) = (cons.rewards(), brave.rewards());
    let pooled = pooled_std(&rc, &rb);
    let (mc, mb) = (cons.summary.mean_reward, brave.summary.mean_reward);
    outcome(
        mb >= mc - pooled,
        format!(
            "brave {mb:.3} >= conservative {mc:.3} - pooled std {pooled:.3} (base-only {:.3})",
            base.summary.mean_reward
        ),
    )
}

fn naive_pendulum(theta: f64, omega: f64, torque: f64) -> [f64; 2] {
    let u = torque.clamp(-2.0, 2.0);
    let w = omega + 0.05 * (-(3.0 * 10.0 / 2.0) * theta.sin() + 3.0 * u);
    [theta + 0.05 * w, w]
}

fn naive_cartpole(s: [f64; 4], force: f64) -> [f64; 4] {
    let (mc, mp, l, g, dt) = (1.0, 0.1, 0.5, 9.8, 0.02);
    let f = force.clamp(-10.0, 10.0);
    let [x, xd, th, thd] = s;
    let xdd = (f + mp * l * thd * thd * th.sin() - mp * g * th.sin() * th.cos())
        / (mc + mp * th.sin().powi(2));
    let thdd = (g * th.sin() - xdd * th.cos()) / l;
    let (xd2, thd2) = (xd + dt * xdd, thd + dt * thdd);
    [x + dt * xd2, xd2, th + dt * thd2, thd2]
}

fn ac6_dynamics_oracle() -> Outcome {
    let start = Instant::now();
    let (p, c) = (Pendulum::default(), CartPoleSwingup::default());
    let mut rng = seed::stream(6, seed::STREAM_AUX);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (th, om, u) = (
            rng.random_range(-10.0..10.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(-3.0..3.0),
        );
        let got = p.step(&PendulumState::new(th, om), u).unwrap();
        let want = naive_pendulum(th, om, u);
        worst = worst
            .max((got.theta - want[0]).abs())
            .max((got.omega - want[1]).abs());

        let s = [
            rng.random_range(-5.0..5.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(-7.0..7.0),
            rng.random_range(-10.0..10.0),
        ];
        let f = rng.random_range(-15.0..15.0);
        let got = c
            .step(&CartPoleState::new(s[0], s[1], s[2], s[3]), f)
            .unwrap();
        let want = naive_cartpole(s, f);
        for (g, w) in [got.x, got.x_dot, got.theta, got.theta_dot]
            .iter()
            .zip(want)
        {
            worst = worst.max((g - w).abs());
        }
    }
    let rest = PendulumState::new(0.0, 0.0);
    let up = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
    let fixed = p.step(&rest, 0.0).unwrap() == rest && c.step(&up, 0.0).unwrap() == up;
    let (fast, time) = within(Duration::from_secs(1), start.elapsed());
    outcome(
        worst <= 1e-12 && fixed && fast,
        format!("max deviation {worst:e} over 2x1000 pairs (tol 1e-12), equilibria fixed: {fixed}, {time}"),
    )
}

fn ac7_certificate_pipeline() -> Outcome {
    let start = Instant::now();
    let env = Pendulum::default();
    let critic = GoalDistanceCritic::default();
    let report = certify(
        &env,
        &critic,
        &PendulumFallback::default(),
        &CertifyConfig::default(),
    )
    .unwrap();
    let q = report.quantities;
    let check = reach_check(
        &env,
        &ConstantPolicy(2.0),
        &critic,
        &report,
        &ReachCheckConfig::default(),
    )
    .unwrap();
    let shape = q.tau >= 1 && q.tau_f >= 1 && q.delta >= 0.0;
    let (fast, time) = within(Duration::from_secs(120), start.elapsed());
    outcome(
        shape && check.passed() >= 29 && fast,
        format!(
            "tau = {}, tau_f = {}, delta = {:.3}, {}/30 trials within d* after (tau + T) * tau_f, {time}",
            q.tau,
            q.tau_f,
            q.delta,
            check.passed()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    // `cargo test` passes harness flags through; a name filter that matches
    // nothing here skips the suite.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 7] = [
        ("AC1 corollary inequality", ac1_corollary),
        ("AC2 reaching-time law", ac2_reaching_law),
        ("AC3 theorem 1 finiteness", ac3_finiteness),
        ("AC4 conservative-mode safety", ac4_conservative_safety),
        ("AC5 mode ordering", ac5_mode_ordering),
        ("AC6 dynamics oracle", ac6_dynamics_oracle),
        ("AC7 certificate pipeline", ac7_certificate_pipeline),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.passed);
        println!(
            "{} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
