//! Multi-trial mode sweeps.
//!
//! Trial `k` of a run with master seed `m` uses the seed `child_seed(m, k)`
//! in every mode, so all modes start from the same initial states and see
//! the same wrapper uniforms. Trials run in parallel; results are collected
//! in trial order and written sequentially, so output bytes depend only on
//! the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use calf_core::env::{CartPoleSwingup, EnvId, Environment, Pendulum};
use calf_core::policy::{
    ConstantPolicy, Critic, GoalDistanceCritic, NetworkCritic, NetworkPolicy, OutputRole, Policy,
    PortableNetwork, WithFallback,
};
use calf_core::seed::child_seed;
use calf_core::stats::{mean, std_dev};
use calf_core::wrapper::{
    run_episode, run_policy_episode, Decision, EpisodeOptions, TrialRecord, WrapperConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CriticSource, ExperimentConfig, Mode, PolicySource};
use crate::plot;
use crate::weights::load_portable_weights;

/// Version of the CSV layouts written by this module and [`crate::plot`].
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub type DynPolicy<E> = Box<dyn Policy<E> + Send>;
pub type DynCritic<E> = Box<dyn Critic<E> + Send>;

fn load_network(
    path: &Path,
    role: OutputRole,
    observation_dim: usize,
) -> anyhow::Result<PortableNetwork> {
    let net = load_portable_weights(path).with_context(|| format!("loading {}", path.display()))?;
    ensure!(
        net.role() == role,
        "{} holds a {} network, expected {}",
        path.display(),
        net.role().as_str(),
        role.as_str()
    );
    ensure!(
        net.observation_dim() == observation_dim,
        "{} takes {}-dimensional observations, the environment produces {}",
        path.display(),
        net.observation_dim(),
        observation_dim
    );
    Ok(net)
}

pub fn load_policy<E: Environment>(env: &E, src: &PolicySource) -> anyhow::Result<DynPolicy<E>> {
    Ok(match src {
        PolicySource::Constant(a) => Box::new(ConstantPolicy(*a)),
        PolicySource::Weights(path) => Box::new(NetworkPolicy(load_network(
            path,
            OutputRole::PolicyMean,
            env.descriptor().observation_dim,
        )?)),
    })
}

pub fn load_critic<E: Environment>(env: &E, src: &CriticSource) -> anyhow::Result<DynCritic<E>> {
    Ok(match src {
        CriticSource::Handcrafted => Box::new(GoalDistanceCritic::default()),
        CriticSource::Weights(path) => Box::new(NetworkCritic(load_network(
            path,
            OutputRole::Value,
            env.descriptor().observation_dim,
        )?)),
    })
}

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub mode: String,
    pub checkpoint: String,
    pub trial: usize,
    pub seed: u64,
    pub horizon: usize,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub goal_reached: bool,
    pub terminated: bool,
    pub n_v_dagger: u64,
    pub n_rho: u64,
    pub n_base: u64,
    pub n_fallback: u64,
    pub last_base_step: Option<u64>,
    pub final_goal_distance: f64,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub checkpoint: String,
    pub p_relax: Option<f64>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub trials: usize,
    pub horizon: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub reached: usize,
    pub reach_rate: f64,
}

/// One row of a per-trial decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: u64,
    pub decision: String,
    pub v_now: f64,
    pub v_dagger: f64,
    pub rho_t: f64,
    pub u_t: f64,
    pub action: f64,
    pub reward: f64,
    pub goal_distance: f64,
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: Mode,
    pub p_relax: Option<f64>,
    pub records: Vec<TrialRecord>,
    pub summary: SummaryRow,
}

impl ModeResult {
    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cumulative_reward).collect()
    }

    pub fn reached(&self) -> usize {
        self.summary.reached
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub env: EnvId,
    pub horizon: usize,
    pub trial_seeds: Vec<u64>,
    pub checkpoint: String,
    pub modes: Vec<ModeResult>,
}

impl ExperimentOutput {
    pub fn mode(&self, mode: Mode) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn trial_rows(&self) -> Vec<TrialRow> {
        self.modes
            .iter()
            .flat_map(|m| {
                m.records.iter().enumerate().map(move |(k, r)| TrialRow {
                    mode: m.mode.as_str().into(),
                    checkpoint: self.checkpoint.clone(),
                    trial: k,
                    seed: r.seed,
                    horizon: r.horizon,
                    steps: r.steps_completed,
                    cumulative_reward: r.cumulative_reward,
                    goal_reached: r.goal_reached,
                    terminated: r.terminated,
                    n_v_dagger: r.counters.n_v_dagger,
                    n_rho: r.counters.n_rho,
                    n_base: r.counters.n_base,
                    n_fallback: r.counters.n_fallback,
                    last_base_step: r.last_base_step,
                    final_goal_distance: r.goal_distances.last().copied().unwrap_or(f64::NAN),
                })
            })
            .collect()
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.modes.iter().map(|m| m.summary.clone()).collect()
    }
}

/// Seeds of trials `0..trials` under `master`.
pub fn trial_seeds(master: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64).map(|k| child_seed(master, k)).collect()
}

/// Runs every configured mode on `env` with already-loaded components.
pub fn run_modes<E: WithFallback>(
    env: &E,
    base: Option<&(dyn Policy<E> + Send)>,
    critic: Option<&(dyn Critic<E> + Send)>,
    cfg: &ExperimentConfig,
) -> anyhow::Result<ExperimentOutput> {
    cfg.validate()?;
    let horizon = cfg.horizon.unwrap_or(env.descriptor().eval_horizon);
    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let fallback = env.default_fallback();
    let opts = if cfg.step_logs {
        EpisodeOptions {
            record_steps: true,
            record_trajectory: false,
        }
    } else {
        EpisodeOptions::SUMMARY_ONLY
    };
    let mut modes = Vec::with_capacity(cfg.modes.len());
    for &mode in &cfg.modes {
        let base = match (mode.needs_base(), base) {
            (true, None) => bail!("mode {mode} needs a base policy (--policy)"),
            (_, b) => b,
        };
        let critic = match (mode.is_wrapped(), critic) {
            (true, None) => bail!("mode {mode} needs a critic (--critic)"),
            (_, c) => c,
        };
        let p_relax = cfg.p_relax_for(mode);
        let records = seeds
            .par_iter()
            .map(|&seed| -> anyhow::Result<TrialRecord> {
                let rec = match mode {
                    Mode::FallbackOnly => {
                        run_policy_episode(env, &fallback, Decision::Fallback, seed, horizon, opts)?
                    }
                    Mode::BaseOnly => run_policy_episode(
                        env,
                        base.expect("checked"),
                        Decision::Base,
                        seed,
                        horizon,
                        opts,
                    )?,
                    _ => {
                        let wcfg = WrapperConfig {
                            nu: cfg.nu,
                            lambda: cfg.lambda,
                            p_relax: p_relax.expect("wrapped mode"),
                            theorem2_guard: cfg.theorem2_guard,
                            horizon,
                            seed,
                        };
                        run_episode(
                            env,
                            base.expect("checked"),
                            critic.expect("checked"),
                            &fallback,
                            &wcfg,
                            opts,
                        )?
                    }
                };
                Ok(rec)
            })
            .collect::<anyhow::Result<Vec<_>>>()
            .with_context(|| format!("mode {mode}"))?;
        let summary = summarize(mode, &cfg.checkpoint, p_relax, cfg, horizon, &records);
        modes.push(ModeResult {
            mode,
            p_relax,
            records,
            summary,
        });
    }
    Ok(ExperimentOutput {
        env: env.descriptor().id,
        horizon,
        trial_seeds: seeds,
        checkpoint: cfg.checkpoint.clone(),
        modes,
    })
}

fn summarize(
    mode: Mode,
    checkpoint: &str,
    p_relax: Option<f64>,
    cfg: &ExperimentConfig,
    horizon: usize,
    records: &[TrialRecord],
) -> SummaryRow {
    let rewards: Vec<f64> = records.iter().map(|r| r.cumulative_reward).collect();
    let reached = records.iter().filter(|r| r.goal_reached).count();
    let wrapped = mode.is_wrapped();
    SummaryRow {
        mode: mode.as_str().into(),
        checkpoint: checkpoint.into(),
        p_relax,
        lambda: wrapped.then_some(cfg.lambda),
        nu: wrapped.then_some(cfg.nu),
        trials: records.len(),
        horizon,
        mean_reward: mean(&rewards),
        std_reward: std_dev(&rewards),
        reached,
        reach_rate: reached as f64 / records.len() as f64,
    }
}

fn run_on<E: WithFallback>(env: &E, cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let needs_base = cfg.modes.iter().any(|m| m.needs_base());
    let needs_critic = cfg.modes.iter().any(|m| m.is_wrapped());
    let base = match (&cfg.policy, needs_base) {
        (Some(src), true) => Some(load_policy(env, src)?),
        (None, true) => bail!("missing weights: the selected modes need a base policy (--policy)"),
        _ => None,
    };
    let critic = match (&cfg.critic, needs_critic) {
        (Some(src), true) => Some(load_critic(env, src)?),
        (None, true) => bail!("missing weights: the selected modes need a critic (--critic)"),
        _ => None,
    };
    run_modes(env, base.as_deref(), critic.as_deref(), cfg)
}

/// Loads the configured components and runs the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.env {
        EnvId::Pendulum => run_on(&Pendulum::default(), cfg),
        EnvId::CartPoleSwingup => run_on(&CartPoleSwingup::default(), cfg),
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: &'static str,
    csv_schema_version: u32,
    generator: String,
    env: &'static str,
    modes: Vec<ManifestMode>,
    lambda: f64,
    nu: f64,
    theorem2_guard: bool,
    trials: usize,
    horizon: usize,
    master_seed: u64,
    trial_seeds: &'a [u64],
    policy: Option<String>,
    critic: Option<String>,
    checkpoint: &'a str,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ManifestMode {
    mode: &'static str,
    p_relax: Option<f64>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn step_rows(rec: &TrialRecord) -> Vec<StepRow> {
    rec.log
        .iter()
        .map(|s| StepRow {
            t: s.t,
            decision: s.decision.as_str().into(),
            v_now: s.v_now,
            v_dagger: s.v_dagger,
            rho_t: s.rho,
            u_t: s.u,
            action: s.action,
            reward: s.reward,
            goal_distance: s.goal_distance,
        })
        .collect()
}

/// Writes `trials.csv`, `summary.csv`, the plot data, per-trial decision
/// logs (when recorded) and `manifest.json` into `dir`. Returns the paths
/// written, relative to `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec![PathBuf::from("trials.csv"), PathBuf::from("summary.csv")];
    let rows = out.trial_rows();
    write_csv(&dir.join("trials.csv"), &rows)?;
    write_csv(&dir.join("summary.csv"), &out.summary_rows())?;
    files.extend(plot::emit_plot_data(dir, &rows)?);
    for m in &out.modes {
        if m.records.iter().all(|r| r.log.is_empty()) {
            continue;
        }
        let sub = PathBuf::from("steps").join(m.mode.as_str());
        fs::create_dir_all(dir.join(&sub))?;
        for (k, rec) in m.records.iter().enumerate() {
            let rel = sub.join(format!("trial_{k:03}.csv"));
            write_csv(&dir.join(&rel), &step_rows(rec))?;
            files.push(rel);
        }
    }
    files.push(PathBuf::from("manifest.json"));
    let manifest = Manifest {
        format: "calf-experiment",
        csv_schema_version: CSV_SCHEMA_VERSION,
        generator: format!("calf-lab {}", env!("CARGO_PKG_VERSION")),
        env: out.env.as_str(),
        modes: out
            .modes
            .iter()
            .map(|m| ManifestMode {
                mode: m.mode.as_str(),
                p_relax: m.p_relax,
            })
            .collect(),
        lambda: cfg.lambda,
        nu: cfg.nu,
        theorem2_guard: cfg.theorem2_guard,
        trials: cfg.trials,
        horizon: out.horizon,
        master_seed: cfg.seed,
        trial_seeds: &out.trial_seeds,
        policy: cfg.policy.as_ref().map(|p| p.to_string()),
        critic: cfg.critic.as_ref().map(|c| c.to_string()),
        checkpoint: &out.checkpoint,
        files: files.iter().map(|f| f.display().to_string()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(files)
}
