use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::TrainConfig;
use crate::env::Environment;
use crate::policy::{ActionTransform, Activation, OutputRole, Policy, PortableNetwork};
use crate::seed::{self, child_seed};
use crate::wrapper::initial_state;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CriticFit {
    pub network: PortableNetwork,
    /// Mean squared Bellman residual before training (index 0) and after
    /// each epoch.
    pub residuals: Vec<f64>,
    pub transitions: usize,
}

struct Transition {
    obs: Vec<f64>,
    next_obs: Vec<f64>,
    reward: f64,
    terminal: bool,
    /// Last stored transition of its rollout.
    last: bool,
}

fn collect<E, P>(env: &E, policy: &P, cfg: &TrainConfig) -> Result<Vec<Transition>>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    let mut data = Vec::with_capacity(cfg.critic.rollouts * cfg.horizon);
    let base = seed::child_seed(cfg.seed, u64::MAX);
    for k in 0..cfg.critic.rollouts {
        let mut s = initial_state(env, child_seed(base, k as u64));
        for step in 0..cfg.horizon {
            let a = policy.act(env, &s)?;
            let next = env.step(&s, a)?;
            let terminal = env.is_terminated(&next);
            data.push(Transition {
                obs: env.observe(&s),
                next_obs: env.observe(&next),
                reward: env.reward(&s, a),
                terminal,
                last: terminal || step + 1 == cfg.horizon,
            });
            if terminal {
                break;
            }
            s = next;
        }
    }
    Ok(data)
}

/// Discounted returns-to-go along the stored rollouts (truncated at the
/// rollout end); only used to pick the target scale.
fn returns_to_go(data: &[Transition], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; data.len()];
    let mut acc = 0.0;
    for i in (0..data.len()).rev() {
        acc = data[i].reward + if data[i].last { 0.0 } else { gamma * acc };
        g[i] = acc;
    }
    g
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + Self::EPS);
        }
    }
}

/// Adds `scale * d(output)/d(params)` to `grad`, given cached activations
/// from `forward_cached`. Parameter order matches `PortableNetwork::parameters`.
fn backprop(
    net: &PortableNetwork,
    acts: &[Vec<f64>],
    scale: f64,
    grad: &mut [f64],
    delta: &mut Vec<f64>,
    prev: &mut Vec<f64>,
) {
    let layers = net.layers();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for l in layers {
        offsets.push(off);
        off += l.weights().len() + l.bias().len();
    }
    delta.clear();
    delta.push(scale);
    for (li, layer) in layers.iter().enumerate().rev() {
        let out = &acts[li + 1];
        let input = &acts[li];
        for (d, y) in delta.iter_mut().zip(out) {
            *d *= layer.activation().derivative_at_output(*y);
        }
        let (n_in, n_out) = (layer.inputs(), layer.outputs());
        let w_off = offsets[li];
        let b_off = w_off + n_in * n_out;
        for o in 0..n_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            let row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
            for (g, x) in row.iter_mut().zip(input) {
                *g += d * x;
            }
            grad[b_off + o] += d;
        }
        if li > 0 {
            prev.clear();
            prev.resize(n_in, 0.0);
            let w = layer.weights();
            for o in 0..n_out {
                let d = delta[o];
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            core::mem::swap(delta, prev);
        }
    }
}

/// Scales the (linear) output layer so that the network returns
/// `scale * out + shift`.
fn fold_affine(net: &PortableNetwork, scale: f64, shift: f64) -> Result<PortableNetwork> {
    let mut p = net.parameters();
    let last = &net.layers()[net.layers().len() - 1];
    let n_last = last.weights().len() + last.bias().len();
    let start = p.len() - n_last;
    let n_w = last.weights().len();
    for (i, x) in p[start..].iter_mut().enumerate() {
        *x *= scale;
        if i >= n_w {
            *x += shift;
        }
    }
    net.with_parameters(&p)
}

fn bellman_residual(net: &PortableNetwork, data: &[Transition], gamma: f64) -> Result<f64> {
    let mut total = 0.0;
    for tr in data {
        let v = net.forward(&tr.obs)?[0];
        let v_next = if tr.terminal {
            0.0
        } else {
            net.forward(&tr.next_obs)?[0]
        };
        let r = tr.reward + gamma * v_next - v;
        total += r * r;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Fitted TD(0): each epoch freezes the targets `r + gamma V(s')` computed
/// with the current network and regresses onto them with Adam.
///
/// Targets are standardised by the mean and spread of the observed
/// discounted returns while training; the affine map is folded into the
/// output layer of the returned network.
pub fn fit_critic<E, P>(env: &E, policy: &P, cfg: &TrainConfig) -> Result<CriticFit>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    cfg.validate()?;
    let d = env.descriptor();
    let ccfg = &cfg.critic;
    let mut rng = seed::stream(child_seed(cfg.seed, 1), seed::STREAM_AUX);
    let init = PortableNetwork::mlp(
        d.observation_dim,
        &ccfg.hidden,
        Activation::Tanh,
        1,
        Activation::Linear,
        0.1,
        OutputRole::Value,
        (Vec::new(), Vec::new()),
        ActionTransform::Clip,
        &mut rng,
    )?;
    let data = collect(env, policy, cfg)?;
    if ccfg.epochs == 0 {
        let residual = bellman_residual(&init, &data, cfg.gamma)?;
        return Ok(CriticFit {
            network: init,
            residuals: vec![residual],
            transitions: data.len(),
        });
    }

    let g = returns_to_go(&data, cfg.gamma);
    let mu = crate::stats::mean(&g);
    let sigma = match crate::stats::std_dev(&g) {
        s if s > 1e-9 && s.is_finite() => s,
        _ => 1.0,
    };
    let gamma = cfg.gamma;
    let mut norm = init;
    let mut params = norm.parameters();
    let mut adam = Adam::new(params.len(), ccfg.learning_rate);
    let mut residuals = vec![bellman_residual(
        &fold_affine(&norm, sigma, mu)?,
        &data,
        gamma,
    )?];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut targets = vec![0.0; data.len()];
    let mut acts = Vec::new();
    let mut grad = vec![0.0; params.len()];
    let (mut delta, mut prev) = (Vec::new(), Vec::new());

    for epoch in 0..ccfg.epochs {
        for (y, tr) in targets.iter_mut().zip(&data) {
            let v_next = if tr.terminal {
                0.0
            } else {
                sigma * norm.forward(&tr.next_obs)?[0] + mu
            };
            *y = (tr.reward + gamma * v_next - mu) / sigma;
        }
        for _ in 0..ccfg.passes_per_epoch.max(1) {
            order.shuffle(&mut rng);
            for batch in order.chunks(ccfg.batch_size) {
                grad.iter_mut().for_each(|x| *x = 0.0);
                for &i in batch {
                    norm.forward_cached(&data[i].obs, &mut acts);
                    let err = acts[acts.len() - 1][0] - targets[i];
                    backprop(
                        &norm,
                        &acts,
                        2.0 * err / batch.len() as f64,
                        &mut grad,
                        &mut delta,
                        &mut prev,
                    );
                }
                adam.step(&mut params, &grad);
                norm.set_parameters(&params)?;
            }
        }
        let residual = bellman_residual(&fold_affine(&norm, sigma, mu)?, &data, gamma)?;
        if !residual.is_finite() {
            return Err(Error::Diverged {
                iteration: epoch,
                reason: alloc::format!("Bellman residual {residual}"),
            });
        }
        residuals.push(residual);
    }
    Ok(CriticFit {
        network: fold_affine(&norm, sigma, mu)?,
        residuals,
        transitions: data.len(),
    })
}
