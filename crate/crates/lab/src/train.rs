//! Training driver: policy search, one critic per checkpoint, and the files
//! the `run` command consumes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use calf_core::env::Environment;
use calf_core::policy::{NetworkPolicy, PortableNetwork};
use calf_core::seed;
use calf_core::trainer::{
    fit_critic, train_policy, CheckpointTag, CriticFit, PopulationEvaluator, TrainConfig,
    TrainOutcome,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::weights::{save_weights_file, WeightsFile};

/// Stream index for probe observations written into weights files.
const PROBE_STREAM: u64 = 3;
pub const PROBES_PER_FILE: usize = 100;

/// Scores population members on the rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl PopulationEvaluator for Parallel {
    fn evaluate(
        &self,
        n: usize,
        score: &(dyn Fn(usize) -> calf_core::Result<f64> + Sync),
    ) -> calf_core::Result<Vec<f64>> {
        (0..n).into_par_iter().map(score).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub outcome: TrainOutcome,
    /// Empty when critics were not requested.
    pub critics: Vec<(CheckpointTag, CriticFit)>,
}

impl Trained {
    pub fn critic(&self, tag: CheckpointTag) -> Option<&CriticFit> {
        self.critics.iter().find(|(t, _)| *t == tag).map(|(_, c)| c)
    }
}

pub fn train<E: Environment>(
    env: &E,
    cfg: &TrainConfig,
    with_critics: bool,
) -> anyhow::Result<Trained> {
    let outcome = train_policy(env, cfg, &Parallel)?;
    let critics = if with_critics {
        outcome
            .checkpoints
            .par_iter()
            .map(|(tag, net)| Ok((*tag, fit_critic(env, &NetworkPolicy(net.clone()), cfg)?)))
            .collect::<calf_core::Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(Trained { outcome, critics })
}

/// Observations of states drawn from the initial-state distribution.
pub fn probe_inputs<E: Environment>(env: &E, seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = seed::stream(seed, PROBE_STREAM);
    (0..n)
        .map(|_| env.observe(&env.sample_initial(&mut rng)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub best_return: f64,
    pub elite_mean_return: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticLogRow {
    pub checkpoint: String,
    pub epoch: usize,
    pub residual: f64,
}

pub fn policy_file_name(tag: CheckpointTag) -> String {
    format!("policy_{tag}.json")
}

pub fn critic_file_name(tag: CheckpointTag) -> String {
    format!("critic_{tag}.json")
}

fn weights_with_metadata<E: Environment>(
    env: &E,
    net: &PortableNetwork,
    probes: &[Vec<f64>],
    tag: CheckpointTag,
    iteration: usize,
) -> anyhow::Result<WeightsFile> {
    let mut file = WeightsFile::from_network(net).with_probes(net, probes)?;
    file.metadata
        .insert("env".into(), env.descriptor().id.as_str().into());
    file.metadata
        .insert("checkpoint".into(), tag.as_str().into());
    file.metadata.insert("iteration".into(), iteration.into());
    file.metadata.insert(
        "generator".into(),
        format!("calf-lab {}", env!("CARGO_PKG_VERSION")).into(),
    );
    Ok(file)
}

/// Writes tagged weights files and the logs into `dir`; returns the file
/// names.
pub fn write_training<E: Environment>(
    dir: &Path,
    env: &E,
    cfg: &TrainConfig,
    trained: &Trained,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let probes = probe_inputs(env, cfg.seed, PROBES_PER_FILE);
    let mut files = Vec::new();
    for (tag, net) in &trained.outcome.checkpoints {
        let it = tag.iteration(cfg.iterations);
        let name = policy_file_name(*tag);
        save_weights_file(
            &dir.join(&name),
            &weights_with_metadata(env, net, &probes, *tag, it)?,
        )?;
        files.push(PathBuf::from(name));
        if let Some(fit) = trained.critic(*tag) {
            let name = critic_file_name(*tag);
            save_weights_file(
                &dir.join(&name),
                &weights_with_metadata(env, &fit.network, &probes, *tag, it)?,
            )?;
            files.push(PathBuf::from(name));
        }
    }

    let mut w = csv::Writer::from_path(dir.join("train_log.csv"))?;
    for h in &trained.outcome.history {
        w.serialize(TrainLogRow {
            iteration: h.iteration,
            mean_return: h.mean_return,
            best_return: h.best_return,
            elite_mean_return: h.elite_returns.iter().sum::<f64>() / h.elite_returns.len() as f64,
            mean_std: h.mean_std,
        })?;
    }
    w.flush()?;
    files.push(PathBuf::from("train_log.csv"));

    if !trained.critics.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("critic_log.csv"))?;
        for (tag, fit) in &trained.critics {
            for (epoch, r) in fit.residuals.iter().enumerate() {
                w.serialize(CriticLogRow {
                    checkpoint: tag.as_str().into(),
                    epoch,
                    residual: *r,
                })?;
            }
        }
        w.flush()?;
        files.push(PathBuf::from("critic_log.csv"));
    }
    Ok(files)
}
