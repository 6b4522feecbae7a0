use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::{CheckpointTag, PopulationEvaluator, TrainConfig};
use crate::env::Environment;
use crate::policy::{ActionTransform, Activation, NetworkPolicy, OutputRole, PortableNetwork};
use crate::seed::{self, child_seed};
use crate::wrapper::{run_policy_episode, Decision, EpisodeOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    /// 1-based iteration index.
    pub iteration: usize,
    pub mean_return: f64,
    pub best_return: f64,
    /// Returns of the elite candidates, best first.
    pub elite_returns: Vec<f64>,
    /// Average search spread after the update.
    pub mean_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub initial: PortableNetwork,
    /// One network per tag, in `CheckpointTag::ALL` order.
    pub checkpoints: Vec<(CheckpointTag, PortableNetwork)>,
    pub history: Vec<IterationLog>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, tag: CheckpointTag) -> &PortableNetwork {
        &self
            .checkpoints
            .iter()
            .find(|(t, _)| *t == tag)
            .expect("every tag is recorded")
            .1
    }
}

/// Policy network with a tanh output scaled onto the action box.
pub(crate) fn initial_policy<E: Environment + ?Sized>(
    env: &E,
    cfg: &TrainConfig,
) -> Result<PortableNetwork> {
    let d = env.descriptor();
    let mut rng = seed::stream(cfg.seed, seed::STREAM_INITIAL_STATE);
    PortableNetwork::mlp(
        d.observation_dim,
        &cfg.hidden,
        Activation::Tanh,
        d.action_dim,
        Activation::Tanh,
        1.0,
        OutputRole::PolicyMean,
        (vec![d.action_low], vec![d.action_high]),
        ActionTransform::Scale,
        &mut rng,
    )
}

/// Mean undiscounted return of `net` over `episodes` episodes whose initial
/// states are drawn from `seed`'s children.
fn mean_return<E: Environment + ?Sized>(
    env: &E,
    net: PortableNetwork,
    seed: u64,
    episodes: usize,
    horizon: usize,
) -> Result<f64> {
    let policy = NetworkPolicy(net);
    let mut total = 0.0;
    for e in 0..episodes {
        let rec = run_policy_episode(
            env,
            &policy,
            Decision::Base,
            child_seed(seed, e as u64),
            horizon,
            EpisodeOptions::SUMMARY_ONLY,
        )?;
        total += rec.cumulative_reward;
    }
    Ok(total / episodes as f64)
}

/// Cross-entropy search over the policy weights, maximising mean episodic
/// return.
pub fn train_policy<E, V>(env: &E, cfg: &TrainConfig, evaluator: &V) -> Result<TrainOutcome>
where
    E: Environment + ?Sized,
    V: PopulationEvaluator + ?Sized,
{
    cfg.validate()?;
    let initial = initial_policy(env, cfg)?;
    let n = initial.parameter_count();
    let mut mean = initial.parameters();
    let mut std = vec![cfg.initial_std; n];
    let mut rng = seed::stream(cfg.seed, seed::STREAM_AUX);
    let n_elite = cfg.elite_count();
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::with_capacity(3);
    for tag in CheckpointTag::ALL {
        if tag.iteration(cfg.iterations) == 0 {
            checkpoints.push((tag, initial.clone()));
        }
    }

    for it in 0..cfg.iterations {
        let candidates: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                mean.iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect();
        let episode_seed = child_seed(cfg.seed, it as u64);
        let score = |i: usize| -> Result<f64> {
            let net = initial.with_parameters(&candidates[i])?;
            mean_return(
                env,
                net,
                episode_seed,
                cfg.episodes_per_candidate,
                cfg.horizon,
            )
        };
        let returns = evaluator.evaluate(cfg.population, &score)?;
        if let Some(bad) = returns.iter().find(|r| !r.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                reason: alloc::format!("candidate return {bad}"),
            });
        }
        let mut order: Vec<usize> = (0..cfg.population).collect();
        // Ties broken by index so the ranking is total.
        order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]).then(a.cmp(&b)));
        let elites = &order[..n_elite];
        for j in 0..n {
            let m = elites.iter().map(|&i| candidates[i][j]).sum::<f64>() / n_elite as f64;
            let var = elites
                .iter()
                .map(|&i| (candidates[i][j] - m) * (candidates[i][j] - m))
                .sum::<f64>()
                / n_elite as f64;
            mean[j] = m;
            std[j] = libm::sqrt(var).max(cfg.min_std);
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                reason: "non-finite search mean".into(),
            });
        }
        history.push(IterationLog {
            iteration: it + 1,
            mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
            best_return: returns[order[0]],
            elite_returns: elites.iter().map(|&i| returns[i]).collect(),
            mean_std: std.iter().sum::<f64>() / n as f64,
        });
        for tag in CheckpointTag::ALL {
            if tag.iteration(cfg.iterations) == it + 1 {
                checkpoints.push((tag, initial.with_parameters(&mean)?));
            }
        }
    }
    checkpoints.sort_by_key(|(t, _)| *t);
    Ok(TrainOutcome {
        initial,
        checkpoints,
        history,
    })
}

/// Return of a network policy on each of the episodes seeded by `seeds`.
pub fn evaluate_policy<E: Environment + ?Sized>(
    env: &E,
    net: &PortableNetwork,
    seeds: &[u64],
    horizon: usize,
) -> Result<Vec<f64>> {
    let policy = NetworkPolicy(net.clone());
    seeds
        .iter()
        .map(|&s| {
            run_policy_episode(
                env,
                &policy,
                Decision::Base,
                s,
                horizon,
                EpisodeOptions::SUMMARY_ONLY,
            )
            .map(|r| r.cumulative_reward)
        })
        .collect()
}
