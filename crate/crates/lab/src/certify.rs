//! Certificate reports and the reaching-time trial check.

use std::fmt::Write as _;

use calf_core::policy::{Critic, Policy, WithFallback};
use calf_core::theory::{t_rho_bar_from_uniforms, CertificateReport};
use calf_core::wrapper::{run_episode, uniform_stream, EpisodeOptions, WrapperConfig};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::experiment::trial_seeds;

/// Serializable view of a [`CertificateReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub env: String,
    pub d_circ: f64,
    pub d_star: f64,
    pub nu: f64,
    pub c: f64,
    pub a: f64,
    pub fitted: bool,
    pub peak_ratio: Option<f64>,
    pub fit_trajectories: Option<usize>,
    pub v_min: f64,
    pub v_max: f64,
    pub tau: u64,
    pub d_pbar: f64,
    pub d_max: f64,
    pub delta: f64,
    pub tau_f: u64,
    pub tau_f_degenerate: bool,
    pub grid_counts: Vec<usize>,
    pub grid_spacing: Vec<f64>,
    pub action_points: usize,
    pub superlevel_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_check: Option<ReachCheck>,
}

impl ReportJson {
    pub fn new(env: &str, r: &CertificateReport) -> Self {
        let q = &r.quantities;
        Self {
            env: env.into(),
            d_circ: r.d_circ,
            d_star: r.d_star,
            nu: r.nu,
            c: r.certificate.c,
            a: r.certificate.a,
            fitted: r.fit.is_some(),
            peak_ratio: r.fit.as_ref().map(|f| f.peak_ratio),
            fit_trajectories: r.fit.as_ref().map(|f| f.trajectories),
            v_min: q.v_min + 0.0,
            v_max: q.v_max + 0.0,
            tau: q.tau,
            d_pbar: q.d_pbar,
            d_max: q.d_max,
            delta: q.delta,
            tau_f: q.tau_f,
            tau_f_degenerate: q.tau_f_degenerate,
            grid_counts: r.grid_counts.clone(),
            grid_spacing: r.grid_spacing.clone(),
            action_points: r.action_points,
            superlevel_points: r.superlevel_points,
            trial_check: None,
        }
    }
}

pub fn format_report(env: &str, r: &CertificateReport) -> String {
    let q = &r.quantities;
    let mut s = String::new();
    let _ = writeln!(s, "certificate report: {env}");
    let _ = writeln!(s, "  d_circ            {}", r.d_circ);
    let _ = writeln!(s, "  d_star            {}", r.d_star);
    let _ = writeln!(s, "  nu                {}", r.nu);
    let _ = writeln!(
        s,
        "  grid              {} points, spacing {:?}, {} actions",
        r.grid_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x"),
        r.grid_spacing,
        r.action_points
    );
    let _ = writeln!(s, "  v_min             {:.6}", q.v_min + 0.0);
    let _ = writeln!(s, "  v_max             {:.6}", q.v_max + 0.0);
    let _ = writeln!(s, "  superlevel points {}", r.superlevel_points);
    let _ = writeln!(s, "  tau               {}", q.tau);
    let _ = writeln!(s, "  d_pbar            {:.6}", q.d_pbar);
    let _ = writeln!(s, "  d_max             {:.6}", q.d_max);
    match &r.fit {
        Some(f) => {
            let _ = writeln!(
                s,
                "  beta              c = {:.6}, a = {:.6} (fitted on {} trajectories, peak ratio {:.4})",
                r.certificate.c, r.certificate.a, f.trajectories, f.peak_ratio
            );
        }
        None => {
            let _ = writeln!(
                s,
                "  beta              c = {}, a = {} (supplied)",
                r.certificate.c, r.certificate.a
            );
        }
    }
    let _ = writeln!(s, "  delta             {:.6}", q.delta);
    let _ = writeln!(
        s,
        "  tau_f             {}{}",
        q.tau_f,
        if q.tau_f_degenerate {
            " (degenerate: d_star >= kappa(d_max))"
        } else {
            ""
        }
    );
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachCheckConfig {
    pub p_relax: f64,
    pub lambda: f64,
    pub theorem2_guard: bool,
    pub trials: usize,
    pub seed: u64,
    /// Steps simulated beyond the guaranteed settling time.
    pub margin: usize,
}

impl Default for ReachCheckConfig {
    fn default() -> Self {
        Self {
            p_relax: 0.5,
            lambda: 0.99,
            theorem2_guard: true,
            trials: 30,
            seed: 0,
            margin: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachTrial {
    pub seed: u64,
    /// Last step at which a relaxation draw succeeded, replayed from the
    /// trial's own uniform stream.
    pub t_rho_bar: u64,
    /// `(tau + t_rho_bar) * tau_f`.
    pub settle_step: u64,
    pub horizon: usize,
    /// Largest goal distance over `t >= settle_step`.
    pub max_distance_after: f64,
    pub goal_reached: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachCheck {
    pub p_relax: f64,
    pub lambda: f64,
    pub theorem2_guard: bool,
    pub d_star: f64,
    pub trials: Vec<ReachTrial>,
}

impl ReachCheck {
    pub fn passed(&self) -> usize {
        self.trials.iter().filter(|t| t.passed).count()
    }
}

/// Runs the wrapper on `cfg.trials` seeds and checks that every trajectory
/// stays within `d_star` of the goal from step `(tau + T) * tau_f` on, where
/// `T` is the trial's realised last relaxation time.
pub fn reach_check<E, B, C>(
    env: &E,
    base: &B,
    critic: &C,
    report: &CertificateReport,
    cfg: &ReachCheckConfig,
) -> anyhow::Result<ReachCheck>
where
    E: WithFallback,
    B: Policy<E> + ?Sized,
    C: Critic<E> + ?Sized,
{
    let q = report.quantities;
    let fallback = env.default_fallback();
    let trials = trial_seeds(cfg.seed, cfg.trials)
        .par_iter()
        .map(|&seed| -> anyhow::Result<ReachTrial> {
            let mut u = uniform_stream(seed);
            let t_bar = t_rho_bar_from_uniforms(cfg.lambda, cfg.p_relax, || u.random::<f64>())?;
            let settle = (q.tau + t_bar) * q.tau_f;
            let horizon = usize::try_from(settle)? + cfg.margin;
            let wcfg = WrapperConfig {
                nu: report.nu,
                lambda: cfg.lambda,
                p_relax: cfg.p_relax,
                theorem2_guard: cfg.theorem2_guard,
                horizon,
                seed,
            };
            let rec = run_episode(
                env,
                base,
                critic,
                &fallback,
                &wcfg,
                EpisodeOptions::SUMMARY_ONLY,
            )?;
            let max_after = rec
                .max_goal_distance_from(settle as usize)
                .unwrap_or(f64::INFINITY);
            Ok(ReachTrial {
                seed,
                t_rho_bar: t_bar,
                settle_step: settle,
                horizon,
                max_distance_after: max_after,
                goal_reached: rec.goal_reached,
                passed: !rec.terminated && max_after <= report.d_star,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(ReachCheck {
        p_relax: cfg.p_relax,
        lambda: cfg.lambda,
        theorem2_guard: cfg.theorem2_guard,
        d_star: report.d_star,
        trials,
    })
}
