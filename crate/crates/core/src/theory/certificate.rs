use alloc::vec::Vec;

use rand::Rng;

use super::grid::{ActionGrid, StateGrid};
use crate::env::Environment;
use crate::policy::{Critic, Policy};
use crate::{seed, Error, Result};

/// Exponential goal-reaching certificate `beta(d, t) = c d exp(-a t)`, read
/// as: a fallback trajectory started at goal distance `d` is within
/// `beta(d, t)` of the goal after `t` steps, except with probability
/// `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub c: f64,
    pub a: f64,
    pub epsilon: f64,
}

impl Certificate {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        let cert = Self { c, a, epsilon: 0.0 };
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite() && self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "certificate needs c, a > 0 (got c = {}, a = {})",
                self.c,
                self.a
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(alloc::format!(
                "epsilon = {} outside [0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn beta(&self, d: f64, t: f64) -> f64 {
        self.c * d * libm::exp(-self.a * t)
    }

    /// Overshoot part `kappa(d) = c d`.
    pub fn kappa(&self, d: f64) -> f64 {
        self.c * d
    }

    /// Decay part `xi(r) = r^a`, so that `beta(d, t) = kappa(d) xi(e^-t)`.
    pub fn xi(&self, r: f64) -> f64 {
        libm::pow(r, self.a)
    }

    pub fn xi_inv(&self, y: f64) -> f64 {
        libm::pow(y, 1.0 / self.a)
    }
}

/// Smallest critic value on the grid points within `d_circ` of the goal.
pub fn compute_v_min<E, C>(env: &E, critic: &C, d_circ: f64, states: &[E::State]) -> Result<f64>
where
    E: Environment + ?Sized,
    C: Critic<E> + ?Sized,
{
    let mut v_min = f64::INFINITY;
    let mut any = false;
    for s in states {
        if env.goal_distance(s) <= d_circ {
            any = true;
            v_min = v_min.min(critic.value(env, s)?);
        }
    }
    if !any {
        return Err(Error::EmptyFeasibleGrid { d_circ });
    }
    Ok(v_min)
}

/// Grid points with `V >= v_min` and the largest critic value among them.
pub fn compute_superlevel_and_vmax<E, C>(
    env: &E,
    critic: &C,
    v_min: f64,
    states: &[E::State],
) -> Result<(Vec<E::State>, f64)>
where
    E: Environment + ?Sized,
    C: Critic<E> + ?Sized,
{
    let mut set = Vec::new();
    let mut v_max = f64::NEG_INFINITY;
    for s in states {
        let v = critic.value(env, s)?;
        if v >= v_min {
            set.push(*s);
            v_max = v_max.max(v);
        }
    }
    Ok((set, v_max))
}

/// Bound on the number of critic improvements: `max(1, floor((v_max - v_min) / nu))`.
pub fn compute_tau(v_min: f64, v_max: f64, nu: f64) -> Result<u64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "nu = {nu} must be > 0"
        )));
    }
    let k = libm::floor((v_max - v_min) / nu);
    Ok(if k.is_finite() && k > 1.0 {
        k as u64
    } else {
        1
    })
}

/// `d_pbar` = largest one-step transition bound over superlevel states and
/// grid actions; `d_max = max(d_circ, d_pbar)`.
pub fn compute_d_pbar_and_dmax<E>(
    env: &E,
    superlevel: &[E::State],
    actions: &ActionGrid,
    d_circ: f64,
) -> Result<(f64, f64)>
where
    E: Environment + ?Sized,
{
    let actions = actions.values();
    let mut d_pbar: f64 = 0.0;
    for s in superlevel {
        for &a in &actions {
            d_pbar = d_pbar.max(env.transition_bound(s, a)?);
        }
    }
    Ok((d_pbar, d_circ.max(d_pbar)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackTime {
    pub steps: u64,
    /// `d_star >= kappa(d_max)`: the bound collapsed to a single step.
    pub degenerate: bool,
}

/// Steps after which the certificate guarantees goal distance `<= d_star`
/// from any start within `d_max`: `max(1, ceil(ln(c d_max / d_star) / a))`.
pub fn compute_tau_fallback(cert: &Certificate, d_max: f64, d_star: f64) -> Result<FallbackTime> {
    cert.validate()?;
    if !(d_star > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "d_star = {d_star} must be > 0"
        )));
    }
    let ratio = cert.kappa(d_max) / d_star;
    if ratio <= 1.0 {
        return Ok(FallbackTime {
            steps: 1,
            degenerate: true,
        });
    }
    // Equivalent to ceil(-ln(xi_inv(d_star / kappa(d_max)))).
    let k = libm::ceil(libm::log(ratio) / cert.a);
    Ok(FallbackTime {
        steps: if k > 1.0 { k as u64 } else { 1 },
        degenerate: false,
    })
}

/// Overshoot bound `delta = beta(d_max, 0)`.
pub fn compute_delta(cert: &Certificate, d_max: f64) -> f64 {
    cert.beta(d_max, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub trajectories: usize,
    pub horizon: usize,
    /// Multiplier on the observed peak overshoot ratio.
    pub headroom: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            horizon: 1000,
            headroom: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateFit {
    pub certificate: Certificate,
    /// `max_t max_traj d(S_t) / d(S_0)`.
    pub peak_ratio: f64,
    pub trajectories: usize,
    /// Per-step envelope of `d(S_t) / d(S_0)` over all fitted trajectories.
    pub envelope: Vec<f64>,
}

/// Draws `n` states uniformly from the environment's state box, keeping
/// those with `0 < goal_distance <= d_max`.
pub fn sample_states_within<E, R>(
    env: &E,
    d_max: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<E::State>>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let bounds = env.state_bounds();
    let mut out = Vec::with_capacity(n);
    let mut buf = alloc::vec![0.0; bounds.len()];
    let max_attempts = 10_000 * n.max(1);
    for _ in 0..max_attempts {
        if out.len() == n {
            return Ok(out);
        }
        for (x, (lo, hi)) in buf.iter_mut().zip(&bounds) {
            *x = lo + (hi - lo) * rng.random::<f64>();
        }
        let s = env.state_from_slice(&buf)?;
        let d = env.goal_distance(&s);
        if d > 0.0 && d <= d_max && !env.is_terminated(&s) {
            out.push(s);
        }
    }
    if out.len() == n {
        return Ok(out);
    }
    Err(Error::InvalidConfig(alloc::format!(
        "could not sample {n} states with 0 < goal distance <= {d_max}"
    )))
}

/// Envelope of `goal_distance(S_t) / goal_distance(S_0)` over fallback
/// rollouts from `starts`, for `t = 0 ..= horizon`.
pub fn decay_envelope<E, P>(
    env: &E,
    fallback: &P,
    starts: &[E::State],
    horizon: usize,
) -> Result<Vec<f64>>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    let mut envelope = alloc::vec![0.0; horizon + 1];
    for s0 in starts {
        let d0 = env.goal_distance(s0);
        if d0 <= 0.0 {
            continue;
        }
        let mut s = *s0;
        envelope[0] = f64::max(envelope[0], 1.0);
        for slot in envelope.iter_mut().skip(1) {
            let a = fallback.act(env, &s)?;
            s = env.step(&s, a)?;
            *slot = f64::max(*slot, env.goal_distance(&s) / d0);
        }
    }
    Ok(envelope)
}

/// Fits `(c, a)` so that `beta` dominates every observed trajectory:
/// `c = headroom * peak ratio`, then `a` is the largest rate with
/// `c exp(-a t) >= envelope(t)` at every step.
///
/// A larger `c` buys a faster rate; the headroom trades the overshoot bound
/// against the reaching time.
pub fn fit_certificate<E, P>(
    env: &E,
    fallback: &P,
    d_max: f64,
    cfg: &FitConfig,
) -> Result<CertificateFit>
where
    E: Environment + ?Sized,
    P: Policy<E> + ?Sized,
{
    if !(cfg.headroom > 1.0) || cfg.trajectories == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidConfig(
            "fit needs headroom > 1 and at least one trajectory step".into(),
        ));
    }
    let mut rng = seed::stream(cfg.seed, seed::STREAM_AUX);
    let starts = sample_states_within(env, d_max, cfg.trajectories, &mut rng)?;
    let envelope = decay_envelope(env, fallback, &starts, cfg.horizon)?;
    let peak = envelope.iter().copied().fold(0.0, f64::max);
    let c = cfg.headroom * peak;
    let mut a = f64::INFINITY;
    for (t, &r) in envelope.iter().enumerate().skip(1) {
        if r > 0.0 {
            a = a.min(libm::log(c / r) / t as f64);
        }
    }
    if !a.is_finite() {
        // Every trajectory entered the goal after one step.
        a = libm::log(c / envelope[1].max(f64::MIN_POSITIVE)).min(50.0);
    }
    let a = a.max(f64::MIN_POSITIVE);
    if envelope.last().copied().unwrap_or(0.0) > 0.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "fallback trajectories have not reached the goal after {} steps",
            cfg.horizon
        )));
    }
    Ok(CertificateFit {
        certificate: Certificate::new(c, a)?,
        peak_ratio: peak,
        trajectories: starts.len(),
        envelope,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub d_circ: f64,
    pub d_star: f64,
    pub nu: f64,
    pub grid_points_per_axis: usize,
    pub action_points: usize,
    /// Use this certificate instead of fitting one.
    pub certificate: Option<Certificate>,
    pub fit: FitConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            d_circ: 2.0,
            d_star: 0.3,
            nu: 0.01,
            grid_points_per_axis: 201,
            action_points: 41,
            certificate: None,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateQuantities {
    pub v_min: f64,
    pub v_max: f64,
    pub tau: u64,
    pub d_pbar: f64,
    pub d_max: f64,
    pub delta: f64,
    pub tau_f: u64,
    pub tau_f_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub d_circ: f64,
    pub d_star: f64,
    pub nu: f64,
    pub certificate: Certificate,
    /// `None` when the certificate was supplied.
    pub fit: Option<CertificateFit>,
    pub quantities: CertificateQuantities,
    pub grid_counts: Vec<usize>,
    pub grid_spacing: Vec<f64>,
    pub action_points: usize,
    pub superlevel_points: usize,
}

/// Computes every certificate quantity on a state grid over the
/// environment's state box. Grid extrema approximate the true ones to within
/// the critic's variation across one grid cell.
pub fn certify<E, C, P>(
    env: &E,
    critic: &C,
    fallback: &P,
    cfg: &CertifyConfig,
) -> Result<CertificateReport>
where
    E: Environment + ?Sized,
    C: Critic<E> + ?Sized,
    P: Policy<E> + ?Sized,
{
    if !(cfg.d_star > 0.0 && cfg.d_star < cfg.d_circ) {
        return Err(Error::InvalidConfig(alloc::format!(
            "need 0 < d_star < d_circ (got d_star = {}, d_circ = {})",
            cfg.d_star,
            cfg.d_circ
        )));
    }
    let grid = StateGrid::for_env(env, cfg.grid_points_per_axis)?;
    let states = grid.states(env)?;
    let v_min = compute_v_min(env, critic, cfg.d_circ, &states)?;
    let (superlevel, v_max) = compute_superlevel_and_vmax(env, critic, v_min, &states)?;
    drop(states);
    let tau = compute_tau(v_min, v_max, cfg.nu)?;
    let actions = ActionGrid::for_env(env, cfg.action_points);
    let (d_pbar, d_max) = compute_d_pbar_and_dmax(env, &superlevel, &actions, cfg.d_circ)?;
    let (certificate, fit) = match cfg.certificate {
        Some(c) => (c, None),
        None => {
            let fit = fit_certificate(env, fallback, d_max, &cfg.fit)?;
            (fit.certificate, Some(fit))
        }
    };
    let tf = compute_tau_fallback(&certificate, d_max, cfg.d_star)?;
    Ok(CertificateReport {
        d_circ: cfg.d_circ,
        d_star: cfg.d_star,
        nu: cfg.nu,
        certificate,
        fit,
        quantities: CertificateQuantities {
            v_min,
            v_max,
            tau,
            d_pbar,
            d_max,
            delta: compute_delta(&certificate, d_max),
            tau_f: tf.steps,
            tau_f_degenerate: tf.degenerate,
        },
        grid_counts: grid.counts().to_vec(),
        grid_spacing: grid.spacing(),
        action_points: cfg.action_points,
        superlevel_points: superlevel.len(),
    })
}
