//! Critic ensembles with delayed targets, the disagreement metric, the
//! aggregation rules, and critic regression against a shared target value.

use rand::Rng;

use crate::approx::{adam_step, AdamState, Mlp, MlpGrads};
use crate::error::ConfigError;

/// N active critics plus N Polyak-delayed target critics, each with its
/// own Adam state. At construction the targets equal the actives exactly.
#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    pub active: Vec<Mlp>,
    pub target: Vec<Mlp>,
    pub opt: Vec<AdamState>,
}

impl CriticEnsemble {
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(n >= 2, "ensemble size must be at least 2");
        let active: Vec<Mlp> =
            (0..n).map(|_| Mlp::new(obs_dim + act_dim, hidden, 1, rng)).collect();
        let target = active.clone();
        let opt = active.iter().map(AdamState::new).collect();
        Self { active, target, opt }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// Per-critic scalar outputs at one `(s, a)` input row.
pub fn q_values(nets: &[Mlp], input: &[f64]) -> Vec<f64> {
    nets.iter().map(|net| net.forward(input)[0]).collect()
}

/// Ensemble disagreement: the average pairwise absolute difference,
/// `delta = (1 / C(N,2)) * sum_{i>j} |q_i - q_j|`.
pub fn disagreement(qs: &[f64]) -> f64 {
    let n = qs.len();
    assert!(n >= 2, "disagreement requires at least two estimates");
    let mut sum = 0.0;
    for i in 1..n {
        for j in 0..i {
            sum += (qs[i] - qs[j]).abs();
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// How an ensemble of Q-values collapses to a single scalar.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationRule {
    /// Minimum over the whole ensemble.
    MinAll,
    /// Minimum over a random subset of size `m`, redrawn once per critic
    /// update step and shared across that step's critic losses.
    SubsetMin { m: usize },
    /// Plain ensemble average.
    Mean,
    /// `mean + kappa * disagreement` with `kappa` in `(-1, 1)`.
    Directional { kappa: f64 },
}

impl AggregationRule {
    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        match self {
            Self::SubsetMin { m } if *m < 2 || *m > n => Err(ConfigError::InvalidValue {
                field: "subset size",
                reason: format!("m = {m} outside 2..={n}"),
            }),
            Self::Directional { kappa } if !kappa.is_finite() => Err(ConfigError::InvalidValue {
                field: "kappa",
                reason: "must be finite".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// A rule with its per-batch randomness fixed: subset indices are drawn
/// once and then shared by every sample of the mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedRule {
    MinAll,
    Subset(Vec<usize>),
    Mean,
    Directional(f64),
}

/// Fix a rule's randomness for one batch. Only `SubsetMin` consumes the
/// rng (a partial Fisher-Yates draw of `m` distinct indices).
pub fn resolve_rule<R: Rng + ?Sized>(
    rule: &AggregationRule,
    n: usize,
    rng: &mut R,
) -> Result<ResolvedRule, ConfigError> {
    rule.validate(n)?;
    Ok(match rule {
        AggregationRule::MinAll => ResolvedRule::MinAll,
        AggregationRule::Mean => ResolvedRule::Mean,
        AggregationRule::Directional { kappa } => ResolvedRule::Directional(*kappa),
        AggregationRule::SubsetMin { m } => {
            let mut idx: Vec<usize> = (0..n).collect();
            for k in 0..*m {
                let pick = rng.random_range(k..n);
                idx.swap(k, pick);
            }
            idx.truncate(*m);
            ResolvedRule::Subset(idx)
        }
    })
}

/// Collapse the per-critic values under the resolved rule.
///
/// For two critics the directional aggregate is evaluated as
/// `(0.5 + kappa) * hi + (0.5 - kappa) * lo`, which equals
/// `mean + kappa * delta` in exact arithmetic but makes the endpoints
/// collapse exactly: `kappa = -1/2` reproduces the minimum and
/// `kappa = +1/2` the maximum, bit for bit. `kappa = 0` rounds identically
/// to the plain mean.
pub fn aggregate(qs: &[f64], rule: &ResolvedRule) -> f64 {
    match rule {
        ResolvedRule::MinAll => qs.iter().copied().fold(f64::INFINITY, f64::min),
        ResolvedRule::Subset(idx) => {
            idx.iter().map(|&i| qs[i]).fold(f64::INFINITY, f64::min)
        }
        ResolvedRule::Mean => qs.iter().sum::<f64>() / qs.len() as f64,
        ResolvedRule::Directional(kappa) => {
            if qs.len() == 2 {
                let (lo, hi) = if qs[0] <= qs[1] { (qs[0], qs[1]) } else { (qs[1], qs[0]) };
                (0.5 + kappa) * hi + (0.5 - kappa) * lo
            } else {
                let mean = qs.iter().sum::<f64>() / qs.len() as f64;
                mean + kappa * disagreement(qs)
            }
        }
    }
}

/// Per-critic weights such that `d aggregate / d q_i = w_i` almost
/// everywhere; the actor update combines per-critic action gradients with
/// these. Ties inside min rules pick the lowest index; `sign(0) = 0` in
/// the directional weights.
pub fn actor_weights(qs: &[f64], rule: &ResolvedRule, out: &mut [f64]) {
    let n = qs.len();
    debug_assert_eq!(out.len(), n);
    out.fill(0.0);
    match rule {
        ResolvedRule::MinAll => {
            let mut best = 0;
            for i in 1..n {
                if qs[i] < qs[best] {
                    best = i;
                }
            }
            out[best] = 1.0;
        }
        ResolvedRule::Subset(idx) => {
            let mut best = idx[0];
            for &i in &idx[1..] {
                if qs[i] < qs[best] {
                    best = i;
                }
            }
            out[best] = 1.0;
        }
        ResolvedRule::Mean => out.fill(1.0 / n as f64),
        ResolvedRule::Directional(kappa) => {
            let inv_n = 1.0 / n as f64;
            let pairs = (n * (n - 1) / 2) as f64;
            for i in 0..n {
                let mut c = 0.0;
                for j in 0..n {
                    if j != i {
                        c += sign(qs[i] - qs[j]);
                    }
                }
                out[i] = inv_n + kappa * (c / pairs);
            }
        }
    }
}

#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One sampled mini-batch, flattened row-major. `next_actions` and
/// `next_log_probs` hold `a' ~ pi(.|s')` drawn at batch-construction time.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub next_actions: Vec<f64>,
    pub next_log_probs: Vec<f64>,
    pub n: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
}

impl SampledBatch {
    /// `[s | a]` rows for the active-critic regression.
    pub fn critic_inputs(&self) -> Vec<f64> {
        interleave(&self.obs, &self.actions, self.n, self.obs_dim, self.act_dim)
    }

    /// `[s' | a']` rows for the target critics.
    pub fn target_inputs(&self) -> Vec<f64> {
        interleave(&self.next_obs, &self.next_actions, self.n, self.obs_dim, self.act_dim)
    }
}

fn interleave(a: &[f64], b: &[f64], n: usize, da: usize, db: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * (da + db)];
    for i in 0..n {
        out[i * (da + db)..i * (da + db) + da].copy_from_slice(&a[i * da..(i + 1) * da]);
        out[i * (da + db) + da..(i + 1) * (da + db)].copy_from_slice(&b[i * db..(i + 1) * db]);
    }
    out
}

/// Per-sample quantities cached while computing targets, enabling cheap
/// recomputation of the directional target during the two-stage kappa
/// update. `delta` fields are nonnegative by construction.
#[derive(Debug, Clone, Default)]
pub struct TargetBatchCache {
    pub rows: Vec<CacheRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct CacheRow {
    /// Mean of the target critics at `(s', a')`.
    pub mean_target_next: f64,
    /// Disagreement of the target critics at `(s', a')`.
    pub delta_bar_next: f64,
    pub log_pi_next: f64,
    pub reward: f64,
    /// Mean of the active critics at `(s, a)`.
    pub mean_active: f64,
    /// Disagreement of the active critics at `(s, a)`.
    pub delta_active: f64,
}

/// Shared per-sample target value `y = r + gamma * (aggregate - alpha *
/// log pi(a'|s'))`, evaluated with the target critics under `rule`. No
/// gradient flows out of this computation.
///
/// When `active_for_cache` is given, the cache rows are fully populated
/// (this costs `N` extra active-critic forwards per sample and is only
/// needed when the directional parameters are being trained or logged).
pub fn critic_target(
    target_nets: &[Mlp],
    batch: &SampledBatch,
    alpha: f64,
    gamma: f64,
    rule: &ResolvedRule,
    active_for_cache: Option<&[Mlp]>,
) -> (Vec<f64>, TargetBatchCache) {
    let n = batch.n;
    let n_critics = target_nets.len();
    let want_cache = active_for_cache.is_some();
    let need_all_targets = want_cache || !matches!(rule, ResolvedRule::Subset(_));

    let target_in = batch.target_inputs();
    // q[i * n + b] = Q-bar_i(s'_b, a'_b); subset-only rules evaluate just
    // the drawn critics.
    let evaluated: Vec<usize> = if need_all_targets {
        (0..n_critics).collect()
    } else if let ResolvedRule::Subset(idx) = rule {
        idx.clone()
    } else {
        unreachable!()
    };
    let mut q = vec![f64::NAN; n_critics * n];
    for &i in &evaluated {
        let out = target_nets[i].forward_batch(&target_in, n);
        q[i * n..(i + 1) * n].copy_from_slice(&out);
    }

    let active_q: Option<Vec<f64>> = active_for_cache.map(|nets| {
        let critic_in = batch.critic_inputs();
        let mut aq = vec![0.0; nets.len() * n];
        for (i, net) in nets.iter().enumerate() {
            let out = net.forward_batch(&critic_in, n);
            aq[i * n..(i + 1) * n].copy_from_slice(&out);
        }
        aq
    });

    let mut y = vec![0.0; n];
    let mut rows = Vec::with_capacity(if want_cache { n } else { 0 });
    let mut qs_row = vec![0.0; n_critics];
    for b in 0..n {
        for i in 0..n_critics {
            qs_row[i] = q[i * n + b];
        }
        let agg = if need_all_targets {
            aggregate(&qs_row, rule)
        } else {
            // Only the subset entries are valid; min over those.
            match rule {
                ResolvedRule::Subset(idx) => {
                    idx.iter().map(|&i| qs_row[i]).fold(f64::INFINITY, f64::min)
                }
                _ => unreachable!(),
            }
        };
        y[b] = batch.rewards[b] + gamma * (agg - alpha * batch.next_log_probs[b]);
        if want_cache {
            let aq = active_q.as_ref().unwrap();
            let n_active = active_for_cache.unwrap().len();
            let mut active_row = vec![0.0; n_active];
            for i in 0..n_active {
                active_row[i] = aq[i * n + b];
            }
            rows.push(CacheRow {
                mean_target_next: qs_row.iter().sum::<f64>() / n_critics as f64,
                delta_bar_next: disagreement(&qs_row),
                log_pi_next: batch.next_log_probs[b],
                reward: batch.rewards[b],
                mean_active: active_row.iter().sum::<f64>() / n_active as f64,
                delta_active: disagreement(&active_row),
            });
        }
    }
    (y, TargetBatchCache { rows })
}

/// Mean squared Bellman loss of one critic and its parameter gradients.
pub fn critic_loss_grads(net: &Mlp, inputs: &[f64], y: &[f64], n: usize) -> (f64, MlpGrads) {
    let cache = net.forward_batch_cached(inputs, n);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; n];
    for b in 0..n {
        let resid = cache.output[b] - y[b];
        loss += resid * resid;
        d_out[b] = 2.0 * resid * inv_n;
    }
    loss *= inv_n;
    let grads = net.backward_batch(&cache, &d_out);
    (loss, grads)
}

/// One Adam step per critic on the shared target `y` (treated as a
/// constant). Returns the summed per-critic losses for finiteness checks.
pub fn critic_update(
    ens: &mut CriticEnsemble,
    inputs: &[f64],
    y: &[f64],
    n: usize,
    lr: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..ens.active.len() {
        let (loss, grads) = critic_loss_grads(&ens.active[i], inputs, y, n);
        total += loss;
        if loss.is_finite() {
            adam_step(&mut ens.active[i], &grads, &mut ens.opt[i], lr);
        }
    }
    total
}

/// Exact convex blend `target = tau * active + (1 - tau) * target`,
/// applied per parameter to every critic.
pub fn polyak_update(ens: &mut CriticEnsemble, tau: f64) {
    assert!(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
    for (tgt, act) in ens.target.iter_mut().zip(ens.active.iter()) {
        for (tl, al) in tgt.layers.iter_mut().zip(act.layers.iter()) {
            for (t, a) in tl.w.iter_mut().zip(al.w.iter()) {
                *t = tau * a + (1.0 - tau) * *t;
            }
            for (t, a) in tl.b.iter_mut().zip(al.b.iter()) {
                *t = tau * a + (1.0 - tau) * *t;
            }
        }
    }
}
