//! Tanh-squashed Gaussian actor with entropy-regularized updates and
//! automatic temperature tuning.
//!
//! The actor network maps an observation to `2 * act_dim` outputs: the
//! first half is the Gaussian mean, the second half the log standard
//! deviation (clamped to `[-20, 2]` before exponentiation). Actions are
//! `tanh` of a reparameterized draw `z = mu + sigma * xi`, and log
//! probabilities carry the change-of-variables correction
//! `-ln(1 - tanh(z)^2 + 1e-6)` per dimension.
//!
//! The actor update ascends `mean(Q_tilde(s, a(s)) - alpha * log pi)` with
//! the gradient flowing through the reparameterized action only; critic
//! parameters are held fixed. The chain rule below is written against the
//! composed objective, so it stays valid for any aggregation rule that
//! supplies per-critic weights.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::approx::{adam_step, AdamState, Mlp, MlpGrads};
use crate::ensemble::{actor_weights, aggregate, ResolvedRule};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Stabilizer inside the tanh change-of-variables correction.
pub const TANH_CORRECTION_EPS: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Stochastic actor: trunk network plus its Adam state.
#[derive(Debug, Clone)]
pub struct Actor {
    pub net: Mlp,
    pub act_dim: usize,
    pub opt: AdamState,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let net = Mlp::new(obs_dim, hidden, 2 * act_dim, rng);
        let opt = AdamState::new(&net);
        Self { net, act_dim, opt }
    }
}

/// One reparameterized draw.
#[derive(Debug, Clone)]
pub struct PolicySample {
    /// Pre-squash Gaussian draw.
    pub z: Vec<f64>,
    /// `tanh(z)`, inside `(-1, 1)^act_dim`.
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Per-dimension log density of the squashed sample, written in terms of
/// the standardized draw `xi = (z - mu) / sigma` and `a = tanh(z)`.
#[inline]
fn log_density_dim(xi: f64, sigma: f64, a: f64) -> f64 {
    -0.5 * xi * xi - sigma.ln() - LN_SQRT_2PI - (1.0 - a * a + TANH_CORRECTION_EPS).ln()
}

/// Log density of an action dimension given the raw Gaussian parameters;
/// used by the normalization oracle in tests and by external callers.
pub fn squashed_log_density(z: f64, mean: f64, std: f64) -> f64 {
    log_density_dim((z - mean) / std, std, z.tanh())
}

#[inline]
fn split_heads(row: &[f64], act_dim: usize) -> (&[f64], &[f64]) {
    (&row[..act_dim], &row[act_dim..2 * act_dim])
}

#[inline]
fn std_from_raw(raw: f64) -> f64 {
    raw.clamp(LOG_STD_MIN, LOG_STD_MAX).exp()
}

impl Actor {
    /// Reparameterized draw `a = tanh(mu + sigma * xi)`, `xi ~ N(0, I)`.
    /// Noise is consumed one standard normal per action dimension.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> PolicySample {
        let out = self.net.forward(obs);
        let (mean, raw_std) = split_heads(&out, self.act_dim);
        let mut z = vec![0.0; self.act_dim];
        let mut action = vec![0.0; self.act_dim];
        let mut log_prob = 0.0;
        for j in 0..self.act_dim {
            let sigma = std_from_raw(raw_std[j]);
            let xi: f64 = rng.sample(StandardNormal);
            z[j] = mean[j] + sigma * xi;
            action[j] = z[j].tanh();
            log_prob += log_density_dim(xi, sigma, action[j]);
        }
        PolicySample { z, action, log_prob }
    }

    /// Evaluation-time action `tanh(mu(obs))`.
    pub fn deterministic_action(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.net.forward(obs);
        out[..self.act_dim].iter().map(|m| m.tanh()).collect()
    }

    /// Batch draw used when assembling mini-batches: returns flattened
    /// actions (`n × act_dim`) and per-sample log probabilities. Noise is
    /// consumed sample-major, dimension-minor.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        n: usize,
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        let out = self.net.forward_batch(obs, n);
        let ad = self.act_dim;
        let mut actions = vec![0.0; n * ad];
        let mut log_probs = vec![0.0; n];
        for b in 0..n {
            let (mean, raw_std) = split_heads(&out[b * 2 * ad..(b + 1) * 2 * ad], ad);
            let mut lp = 0.0;
            for j in 0..ad {
                let sigma = std_from_raw(raw_std[j]);
                let xi: f64 = rng.sample(StandardNormal);
                let z = mean[j] + sigma * xi;
                let a = z.tanh();
                actions[b * ad + j] = a;
                lp += log_density_dim(xi, sigma, a);
            }
            log_probs[b] = lp;
        }
        (actions, log_probs)
    }
}

/// Outcome of one actor evaluation or update.
#[derive(Debug)]
pub struct ActorEval {
    /// `mean(Q_tilde - alpha * log pi)` over the batch.
    pub objective: f64,
    pub log_probs: Vec<f64>,
    /// Per-sample aggregated critic value at the sampled action.
    pub q_tilde: Vec<f64>,
    pub grads: MlpGrads,
}

/// Objective and gradient of the entropy-regularized actor loss for a
/// fixed noise matrix (`n × act_dim` standard normals). Exposed separately
/// from [`actor_update`] so finite-difference checks can pin the noise.
#[allow(clippy::too_many_arguments)]
pub fn actor_eval(
    net: &Mlp,
    act_dim: usize,
    critics: &[Mlp],
    rule: &ResolvedRule,
    obs: &[f64],
    n: usize,
    noise: &[f64],
    alpha: f64,
) -> ActorEval {
    let obs_dim = net.input_dim();
    debug_assert_eq!(obs.len(), n * obs_dim);
    debug_assert_eq!(noise.len(), n * act_dim);
    let n_critics = critics.len();

    let trunk = net.forward_batch_cached(obs, n);

    // Squash and assemble critic inputs [obs | action].
    let in_dim = obs_dim + act_dim;
    let mut critic_in = vec![0.0; n * in_dim];
    let mut sigmas = vec![0.0; n * act_dim];
    let mut squashed = vec![0.0; n * act_dim];
    let mut std_mask = vec![false; n * act_dim];
    let mut log_probs = vec![0.0; n];
    for b in 0..n {
        let (mean, raw_std) = split_heads(&trunk.output[b * 2 * act_dim..(b + 1) * 2 * act_dim], act_dim);
        critic_in[b * in_dim..b * in_dim + obs_dim].copy_from_slice(&obs[b * obs_dim..(b + 1) * obs_dim]);
        let mut lp = 0.0;
        for j in 0..act_dim {
            let raw = raw_std[j];
            let sigma = std_from_raw(raw);
            let xi = noise[b * act_dim + j];
            let z = mean[j] + sigma * xi;
            let a = z.tanh();
            sigmas[b * act_dim + j] = sigma;
            squashed[b * act_dim + j] = a;
            std_mask[b * act_dim + j] = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
            critic_in[b * in_dim + obs_dim + j] = a;
            lp += log_density_dim(xi, sigma, a);
        }
        log_probs[b] = lp;
    }

    // Per-critic values and input gradients at the sampled actions.
    let mut q = vec![0.0; n_critics * n];
    let mut dq_din = vec![0.0; n_critics * n * in_dim];
    let ones = vec![1.0; n];
    for (i, critic) in critics.iter().enumerate() {
        let cache = critic.forward_batch_cached(&critic_in, n);
        q[i * n..(i + 1) * n].copy_from_slice(&cache.output);
        let d_in = critic.backward_batch_input(&cache, &ones);
        dq_din[i * n * in_dim..(i + 1) * n * in_dim].copy_from_slice(&d_in);
    }

    // Aggregate values, rule weights, and the resulting action gradients.
    let mut q_tilde = vec![0.0; n];
    let mut qs_row = vec![0.0; n_critics];
    let mut weights = vec![0.0; n_critics];
    let mut d_trunk = vec![0.0; n * 2 * act_dim];
    let inv_n = 1.0 / n as f64;
    let mut objective = 0.0;
    for b in 0..n {
        for i in 0..n_critics {
            qs_row[i] = q[i * n + b];
        }
        q_tilde[b] = aggregate(&qs_row, rule);
        actor_weights(&qs_row, rule, &mut weights);
        objective += q_tilde[b] - alpha * log_probs[b];

        for j in 0..act_dim {
            let mut dq_da = 0.0;
            for i in 0..n_critics {
                let w = weights[i];
                if w != 0.0 {
                    dq_da += w * dq_din[(i * n + b) * in_dim + obs_dim + j];
                }
            }
            let sigma = sigmas[b * act_dim + j];
            let a = squashed[b * act_dim + j];
            let xi = noise[b * act_dim + j];
            let one_m_a2 = 1.0 - a * a;
            let corr = 2.0 * a * one_m_a2 / (one_m_a2 + TANH_CORRECTION_EPS);
            // Objective S = Q_tilde - alpha * log pi, differentiated through
            // z = mu + sigma * xi with xi fixed.
            let ds_dz = dq_da * one_m_a2 - alpha * (-xi / sigma + corr);
            let ds_dmu = ds_dz - alpha * (xi / sigma);
            let ds_dsigma = ds_dz * xi - alpha * (xi * xi / sigma - 1.0 / sigma);
            let ds_draw = if std_mask[b * act_dim + j] { ds_dsigma * sigma } else { 0.0 };
            // Loss is the negated mean objective.
            d_trunk[b * 2 * act_dim + j] = -inv_n * ds_dmu;
            d_trunk[b * 2 * act_dim + act_dim + j] = -inv_n * ds_draw;
        }
    }
    objective *= inv_n;

    let grads = net.backward_batch(&trunk, &d_trunk);
    ActorEval { objective, log_probs, q_tilde, grads }
}

/// One ascent step on the entropy-regularized actor objective. Draws fresh
/// reparameterization noise from `rng` and applies Adam. The caller is
/// responsible for aborting on a non-finite objective.
#[allow(clippy::too_many_arguments)]
pub fn actor_update<R: Rng + ?Sized>(
    actor: &mut Actor,
    critics: &[Mlp],
    rule: &ResolvedRule,
    obs: &[f64],
    n: usize,
    alpha: f64,
    lr: f64,
    rng: &mut R,
) -> ActorEval {
    let noise: Vec<f64> = (0..n * actor.act_dim).map(|_| rng.sample(StandardNormal)).collect();
    let eval = actor_eval(&actor.net, actor.act_dim, critics, rule, obs, n, &noise, alpha);
    if eval.objective.is_finite() {
        adam_step(&mut actor.net, &eval.grads, &mut actor.opt, lr);
    }
    eval
}

/// Entropy temperature state: `alpha = exp(log_alpha)` stays positive for
/// any update sequence.
#[derive(Debug, Clone)]
pub struct AlphaState {
    pub log_alpha: f64,
    pub h_target: f64,
    pub lr: f64,
}

impl AlphaState {
    pub fn new(alpha_init: f64, h_target: f64, lr: f64) -> Self {
        assert!(alpha_init > 0.0);
        Self { log_alpha: alpha_init.ln(), h_target, lr }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Descent step on the temperature objective via `log_alpha`:
    /// `log_alpha -= lr * mean(-log_pi - h_target)`. Measured entropy below
    /// the target therefore strictly increases alpha.
    pub fn update(&mut self, batch_log_probs: &[f64]) {
        assert!(!batch_log_probs.is_empty());
        let g = batch_log_probs.iter().map(|lp| -lp - self.h_target).sum::<f64>()
            / batch_log_probs.len() as f64;
        self.log_alpha -= self.lr * g;
    }
}
