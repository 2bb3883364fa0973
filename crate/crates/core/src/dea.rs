//! Learnable directional aggregation parameters.
//!
//! Two scalars steer the ensemble aggregates: `kappa_bar` scales
//! disagreement inside the critic target and `kappa` inside the
//! actor-update value. Both live in `(-1, 1)` as the hyperbolic tangent of
//! unconstrained raw parameters, and both are trained with sign-based
//! gradients of disagreement-weighted Bellman residuals: each sample
//! contributes only the direction of its residual, never its magnitude.
//!
//! The update order is fixed: `kappa_bar` first, then `kappa` with
//! residuals recomputed under the already-updated `kappa_bar`. Networks
//! and the policy are constants here; everything needed is recombined
//! from [`TargetBatchCache`] scalars.

use crate::ensemble::{sign, CacheRow, TargetBatchCache};
use crate::error::ConfigError;

/// Denominator floor inside the logging losses; the production sign
/// gradients need no division at all.
pub const DELTA_FLOOR: f64 = 1e-8;

/// Largest representable magnitude strictly inside `(-1, 1)`.
const KAPPA_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// The directional parameters and their learning rates.
///
/// Updates run in the unconstrained tangent space (`u = atanh(kappa)`,
/// step, `tanh` back), but the constrained values are what is stored:
/// initialization is then exact, which matters for the frozen-parameter
/// degenerate cases where e.g. `kappa = -1/2` must reproduce the
/// two-critic minimum bit for bit.
#[derive(Debug, Clone)]
pub struct DirectionalParams {
    kappa_bar: f64,
    kappa: f64,
    pub lr_bar: f64,
    pub lr: f64,
}

impl DirectionalParams {
    /// Initialize from the constrained values, e.g. `kappa_bar = -0.8`,
    /// `kappa = 0.0`, so the raw parameters start at their atanh images.
    pub fn new(
        kappa_bar_init: f64,
        kappa_init: f64,
        lr_bar: f64,
        lr: f64,
    ) -> Result<Self, ConfigError> {
        for (field, v) in [("kappa_bar_init", kappa_bar_init), ("kappa_init", kappa_init)] {
            if !(v.is_finite() && v.abs() < 1.0) {
                return Err(ConfigError::InvalidValue {
                    field,
                    reason: format!("{v} is outside (-1, 1)"),
                });
            }
        }
        for (field, v) in [("lr_kappa_bar", lr_bar), ("lr_kappa", lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::InvalidValue {
                    field,
                    reason: format!("{v} must be positive"),
                });
            }
        }
        Ok(Self { kappa_bar: kappa_bar_init, kappa: kappa_init, lr_bar, lr })
    }

    /// Critic-side aggregation parameter, always in `(-1, 1)`.
    pub fn kappa_bar(&self) -> f64 {
        self.kappa_bar
    }

    /// Actor-side aggregation parameter, always in `(-1, 1)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// One tangent-space descent step: `u -= lr * g * (1 - kappa^2)`,
    /// mapped back through `tanh`. The saturation factor keeps the value
    /// inside the open interval for any update sequence.
    fn tangent_step(kappa: f64, lr: f64, grad: f64) -> f64 {
        if grad == 0.0 {
            return kappa;
        }
        let u = kappa.atanh() - lr * grad * (1.0 - kappa * kappa);
        u.tanh().clamp(-KAPPA_MAX, KAPPA_MAX)
    }

    /// Bellman residual of one cached sample under the given parameters:
    /// `e = [mean_active + kappa * delta] - [r + gamma * (mean_target' +
    /// kappa_bar * delta_bar' - alpha * log pi')]`.
    pub fn residual(row: &CacheRow, kappa_bar: f64, kappa: f64, gamma: f64, alpha: f64) -> f64 {
        let q_tilde = row.mean_active + kappa * row.delta_active;
        let y = row.reward
            + gamma * (row.mean_target_next + kappa_bar * row.delta_bar_next
                - alpha * row.log_pi_next);
        q_tilde - y
    }

    fn mean_residual_sign(&self, cache: &TargetBatchCache, gamma: f64, alpha: f64) -> f64 {
        let kb = self.kappa_bar();
        let k = self.kappa();
        let sum: f64 = cache
            .rows
            .iter()
            .map(|row| sign(Self::residual(row, kb, k, gamma, alpha)))
            .sum();
        sum / cache.rows.len() as f64
    }

    /// Descent step on the critic-side parameter. The closed-form gradient
    /// with respect to `kappa_bar` is `-gamma * mean(sign e)`; it is chained
    /// through the tangent reparameterization with the factor
    /// `1 - kappa_bar^2`. Uniformly negative residuals therefore push
    /// `kappa_bar` down.
    pub fn update_kappa_bar(&mut self, cache: &TargetBatchCache, gamma: f64, alpha: f64) {
        assert!(!cache.rows.is_empty());
        let g_kappa_bar = -gamma * self.mean_residual_sign(cache, gamma, alpha);
        self.kappa_bar = Self::tangent_step(self.kappa_bar, self.lr_bar, g_kappa_bar);
    }

    /// Descent step on the actor-side parameter, run strictly after
    /// [`DirectionalParams::update_kappa_bar`] so the residuals see the
    /// updated `kappa_bar`. The gradient with respect to `kappa` is
    /// `+mean(sign e)`; uniformly negative residuals push `kappa` up.
    pub fn update_kappa(&mut self, cache: &TargetBatchCache, gamma: f64, alpha: f64) {
        assert!(!cache.rows.is_empty());
        let g_kappa = self.mean_residual_sign(cache, gamma, alpha);
        self.kappa = Self::tangent_step(self.kappa, self.lr, g_kappa);
    }
}

/// Disagreement-weighted absolute residual with the target-side
/// disagreement in the denominator; used for logging and for
/// finite-difference verification of the sign gradient, never in the
/// production update path.
pub fn target_weighted_loss(
    cache: &TargetBatchCache,
    kappa_bar: f64,
    kappa: f64,
    gamma: f64,
    alpha: f64,
) -> f64 {
    weighted_loss(cache, kappa_bar, kappa, gamma, alpha, |row| row.delta_bar_next)
}

/// Same as [`target_weighted_loss`] but weighted by the active-side
/// disagreement, matching the actor-parameter objective.
pub fn actor_weighted_loss(
    cache: &TargetBatchCache,
    kappa_bar: f64,
    kappa: f64,
    gamma: f64,
    alpha: f64,
) -> f64 {
    weighted_loss(cache, kappa_bar, kappa, gamma, alpha, |row| row.delta_active)
}

fn weighted_loss(
    cache: &TargetBatchCache,
    kappa_bar: f64,
    kappa: f64,
    gamma: f64,
    alpha: f64,
    denom: impl Fn(&CacheRow) -> f64,
) -> f64 {
    assert!(!cache.rows.is_empty());
    let sum: f64 = cache
        .rows
        .iter()
        .map(|row| {
            let e = DirectionalParams::residual(row, kappa_bar, kappa, gamma, alpha);
            e.abs() / denom(row).max(DELTA_FLOOR)
        })
        .sum();
    sum / cache.rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cache_of(rows: Vec<CacheRow>) -> TargetBatchCache {
        TargetBatchCache { rows }
    }

    fn row(mean_active: f64, delta_active: f64, reward: f64, mean_t: f64, delta_bar: f64, log_pi: f64) -> CacheRow {
        CacheRow {
            mean_target_next: mean_t,
            delta_bar_next: delta_bar,
            log_pi_next: log_pi,
            reward,
            mean_active,
            delta_active,
        }
    }

    fn random_cache(rng: &mut ChaCha8Rng, n: usize) -> TargetBatchCache {
        cache_of(
            (0..n)
                .map(|_| {
                    row(
                        rng.random_range(-3.0..3.0),
                        rng.random_range(0.2..2.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(0.2..2.0),
                        rng.random_range(-3.0..0.0),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn init_matches_tangent_images() {
        let p = DirectionalParams::new(-0.8, 0.0, 3e-4, 3e-4).unwrap();
        assert_eq!(p.kappa_bar(), -0.8);
        assert_eq!(p.kappa(), 0.0);
        // The raw tangent-space image of the initialization.
        assert!((p.kappa_bar().atanh() - (-1.0986122886681098)).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_out_of_range() {
        assert!(DirectionalParams::new(-1.0, 0.0, 1e-3, 1e-3).is_err());
        assert!(DirectionalParams::new(0.0, 1.5, 1e-3, 1e-3).is_err());
        assert!(DirectionalParams::new(0.0, 0.0, 0.0, 1e-3).is_err());
    }

    #[test]
    fn residual_direct_substitution() {
        // e = 2 - [1 + 0.99 * (3 - 1 + 0.2)] = -1.178
        let r = row(2.0, 1.0, 1.0, 3.0, 2.0, -1.0);
        let e = DirectionalParams::residual(&r, -0.5, 0.0, 0.99, 0.2);
        assert!((e + 1.178).abs() < 1e-12);
    }

    #[test]
    fn residual_zero_cases() {
        // Both brackets equal 5.0.
        let r = row(5.0, 2.0, 5.0, 9.9, 1.0, 0.0);
        assert_eq!(DirectionalParams::residual(&r, 0.3, 0.0, 0.0, 0.2), 0.0);
        // gamma = 0, kappa = 0, mean_active = r.
        let r = row(0.75, 1.0, 0.75, 2.0, 1.0, -1.0);
        assert_eq!(DirectionalParams::residual(&r, -0.5, 0.0, 0.0, 0.2), 0.0);
    }

    #[test]
    fn uniformly_negative_residuals_move_kappas_apart() {
        // mean_active far below the target value: every residual negative.
        let cache = cache_of(vec![row(-5.0, 0.5, 1.0, 3.0, 1.0, -1.0); 8]);
        let mut p = DirectionalParams::new(-0.2, 0.1, 0.05, 0.05).unwrap();
        let (kb0, k0) = (p.kappa_bar(), p.kappa());
        p.update_kappa_bar(&cache, 0.99, 0.2);
        p.update_kappa(&cache, 0.99, 0.2);
        assert!(p.kappa_bar() < kb0, "kappa_bar should move down");
        assert!(p.kappa() > k0, "kappa should move up");
        // Closed form: g_kappa_bar = -0.99 * (-1) = +0.99, chained through
        // the tangent factor and applied to the raw parameter.
        let expected_u_bar = kb0.atanh() - 0.05 * 0.99 * (1.0 - kb0 * kb0);
        assert!((p.kappa_bar() - expected_u_bar.tanh()).abs() < 1e-12);
        let expected_u = k0.atanh() - -0.05 * (1.0 - k0 * k0);
        assert!((p.kappa() - expected_u.tanh()).abs() < 1e-12);
    }

    #[test]
    fn balanced_signs_leave_params_unchanged() {
        let neg = row(-5.0, 0.5, 1.0, 3.0, 1.0, -1.0);
        let pos = row(9.0, 0.5, 1.0, 3.0, 1.0, -1.0);
        let cache = cache_of(vec![neg, pos, neg, pos]);
        let mut p = DirectionalParams::new(-0.3, 0.2, 0.05, 0.05).unwrap();
        let (kb0, k0) = (p.kappa_bar(), p.kappa());
        p.update_kappa_bar(&cache, 0.99, 0.2);
        p.update_kappa(&cache, 0.99, 0.2);
        assert_eq!(p.kappa_bar(), kb0);
        assert_eq!(p.kappa(), k0);
    }

    #[test]
    fn zero_residuals_contribute_nothing() {
        // Construct rows whose target value equals the actor-side aggregate
        // exactly, so sign(0) = 0 zeroes each contribution.
        let mut p = DirectionalParams::new(-0.3, 0.0, 0.05, 0.05).unwrap();
        let (gamma, alpha) = (0.5, 0.2);
        let y = 1.0 + gamma * (2.0 + p.kappa_bar() * 1.0 - -alpha);
        let r = row(y, 2.0, 1.0, 2.0, 1.0, -1.0);
        let cache = cache_of(vec![r; 4]);
        assert_eq!(DirectionalParams::residual(&r, p.kappa_bar(), p.kappa(), gamma, alpha), 0.0);
        let kb0 = p.kappa_bar();
        p.update_kappa_bar(&cache, gamma, alpha);
        assert_eq!(p.kappa_bar(), kb0);
    }

    #[test]
    fn params_stay_inside_open_interval() {
        let all_neg = cache_of(vec![row(-50.0, 0.5, 1.0, 3.0, 1.0, -1.0); 4]);
        let mut p = DirectionalParams::new(-0.8, 0.0, 0.5, 0.5).unwrap();
        for _ in 0..10_000 {
            p.update_kappa_bar(&all_neg, 0.99, 0.2);
            p.update_kappa(&all_neg, 0.99, 0.2);
            assert!(p.kappa_bar() > -1.0 && p.kappa_bar() < 1.0);
            assert!(p.kappa() > -1.0 && p.kappa() < 1.0);
        }
        // Saturation shrinks updates via the 1 - kappa^2 factor but never
        // escapes the interval.
        assert!(p.kappa_bar() < -0.999);
        assert!(p.kappa() > 0.999);
    }

    #[test]
    fn weighted_loss_examples() {
        // Zero residuals give zero loss.
        let zero = cache_of(vec![row(5.0, 2.0, 5.0, 9.9, 1.0, 0.0); 3]);
        assert_eq!(target_weighted_loss(&zero, 0.3, 0.0, 0.0, 0.2), 0.0);
        // Single sample |e| = 2, delta_bar' = 4 -> loss 0.5.
        let r = row(-1.0, 1.0, 1.0, 0.0, 4.0, 0.0);
        let cache = cache_of(vec![r]);
        // e = (-1 + 0) - (1 + 0 * ...) with gamma = 0 -> -2.
        let loss = target_weighted_loss(&cache, 0.0, 0.0, 0.0, 0.2);
        assert!((loss - 0.5).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_recover_sign_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let gamma = 0.99;
        let alpha = 0.2;
        let h = 1e-6;
        for _ in 0..50 {
            let cache = random_cache(&mut rng, 16);
            let kb = rng.random_range(-0.9..0.9);
            let k = rng.random_range(-0.9..0.9);
            // Skip batches with residuals too close to zero for the step h.
            let min_abs = cache
                .rows
                .iter()
                .map(|r| DirectionalParams::residual(r, kb, k, gamma, alpha).abs())
                .fold(f64::INFINITY, f64::min);
            if min_abs < 1e-3 {
                continue;
            }
            let mean_sign = cache
                .rows
                .iter()
                .map(|r| sign(DirectionalParams::residual(r, kb, k, gamma, alpha)))
                .sum::<f64>()
                / cache.rows.len() as f64;

            let fd_bar = (target_weighted_loss(&cache, kb + h, k, gamma, alpha)
                - target_weighted_loss(&cache, kb - h, k, gamma, alpha))
                / (2.0 * h);
            let closed_bar = -gamma * mean_sign;
            assert!(
                (fd_bar - closed_bar).abs() <= 1e-4 * closed_bar.abs().max(1e-3),
                "fd {fd_bar} vs closed form {closed_bar}"
            );

            let fd_k = (actor_weighted_loss(&cache, kb, k + h, gamma, alpha)
                - actor_weighted_loss(&cache, kb, k - h, gamma, alpha))
                / (2.0 * h);
            assert!(
                (fd_k - mean_sign).abs() <= 1e-4 * mean_sign.abs().max(1e-3),
                "fd {fd_k} vs closed form {mean_sign}"
            );
        }
    }

    #[test]
    fn gradients_ignore_residual_magnitude() {
        // Scaling every residual by c > 0 leaves both updates unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = random_cache(&mut rng, 12);
        let scaled = cache_of(
            base.rows
                .iter()
                .map(|r| {
                    // Scale mean_active and the bracket contents so e -> 10 e
                    // while the deltas (and thus the weights) are untouched
                    // in the sign path.
                    let mut r2 = *r;
                    let e = DirectionalParams::residual(r, 0.1, 0.2, 0.99, 0.2);
                    r2.mean_active += 9.0 * e;
                    r2
                })
                .collect(),
        );
        let mut p1 = DirectionalParams::new(0.1, 0.2, 0.03, 0.03).unwrap();
        let mut p2 = p1.clone();
        p1.update_kappa_bar(&base, 0.99, 0.2);
        p2.update_kappa_bar(&scaled, 0.99, 0.2);
        assert_eq!(p1.kappa_bar(), p2.kappa_bar());
    }
}
