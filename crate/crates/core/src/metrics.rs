//! Evaluation protocol and summary metrics: final return, interquartile
//! mean, area under the learning curve, and cross-method average ranks.

use std::collections::BTreeMap;

use crate::env::EnvKind;
use crate::policy::Actor;
use crate::rngstream::{stream, STREAM_EVAL};

/// One evaluation checkpoint.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Run full episodes with deterministic actions and return the mean and
/// population standard deviation of the undiscounted episode returns.
/// Episode starts depend only on `eval_seed`, so repeated calls with the
/// same actor reproduce the same statistics exactly.
pub fn evaluate(actor: &Actor, env: EnvKind, episodes: usize, eval_seed: u64) -> (f64, f64) {
    assert!(episodes >= 1);
    let mut rng = stream(eval_seed, STREAM_EVAL);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (state, obs) = env.reset(&mut rng);
        returns.push(episode_return(actor, env, state, obs));
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    (mean, var.sqrt())
}

/// Undiscounted return of one full episode from the given start, acting
/// deterministically.
pub fn episode_return(
    actor: &Actor,
    env: EnvKind,
    mut state: crate::env::EnvState,
    mut obs: Vec<f64>,
) -> f64 {
    let mut total = 0.0;
    loop {
        let action = actor.deterministic_action(&obs);
        let step = env.step(&state, &action);
        total += step.reward;
        if step.truncated {
            return total;
        }
        state = step.state;
        obs = step.obs;
    }
}

/// Interquartile mean: sort, drop `floor(n/4)` from each end, average the
/// rest. Equals the plain mean for `n <= 3`.
pub fn iqm(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "iqm of an empty list");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let trim = sorted.len() / 4;
    let kept = &sorted[trim..sorted.len() - trim];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Area under the learning curve for uniformly spaced checkpoints: the
/// arithmetic mean of the evaluation returns.
pub fn aulc(records: &[EvalRecord]) -> f64 {
    assert!(!records.is_empty(), "aulc of an empty curve");
    records.iter().map(|r| r.mean_return).sum::<f64>() / records.len() as f64
}

/// Average rank per method across environments. Within each environment
/// the best value receives rank 1 and ties get the mean of the positions
/// they straddle. Every method must provide a value for every environment.
pub fn rank_table(
    values: &BTreeMap<String, BTreeMap<String, f64>>,
    higher_is_better: bool,
) -> Result<BTreeMap<String, f64>, String> {
    let methods: Vec<&String> = values.keys().collect();
    if methods.is_empty() {
        return Err("empty rank table".into());
    }
    let envs: Vec<String> = values[methods[0]].keys().cloned().collect();
    for m in &methods {
        let got: Vec<&String> = values[*m].keys().collect();
        if got.len() != envs.len() || !envs.iter().all(|e| values[*m].contains_key(e)) {
            return Err(format!("method {m} is missing environments (have {got:?}, want {envs:?})"));
        }
    }
    let mut sums: BTreeMap<String, f64> = methods.iter().map(|m| ((*m).clone(), 0.0)).collect();
    for env in &envs {
        let mut row: Vec<(&String, f64)> = methods.iter().map(|m| (*m, values[*m][env])).collect();
        row.sort_by(|a, b| {
            let ord = a.1.partial_cmp(&b.1).unwrap();
            if higher_is_better {
                ord.reverse()
            } else {
                ord
            }
        });
        // Tied values share the average of their positions (1-based).
        let mut i = 0;
        while i < row.len() {
            let mut j = i;
            while j + 1 < row.len() && row[j + 1].1 == row[i].1 {
                j += 1;
            }
            let rank = (i + 1 + j + 1) as f64 / 2.0;
            for item in &row[i..=j] {
                *sums.get_mut(item.0).unwrap() += rank;
            }
            i = j + 1;
        }
    }
    Ok(sums.into_iter().map(|(m, s)| (m, s / envs.len() as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{AdamState, Mlp};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(entries: &[(&str, &[(&str, f64)])]) -> BTreeMap<String, BTreeMap<String, f64>> {
        entries
            .iter()
            .map(|(m, envs)| {
                (m.to_string(), envs.iter().map(|(e, v)| (e.to_string(), *v)).collect())
            })
            .collect()
    }

    #[test]
    fn iqm_examples() {
        assert_eq!(iqm(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(iqm(&[5.0, 5.0, 5.0, 5.0, 5.0]), 5.0);
        assert_eq!(iqm(&[0.0, 0.0, 0.0, 100.0]), 0.0);
        // n <= 3 keeps everything.
        assert_eq!(iqm(&[1.0, 10.0]), 5.5);
    }

    #[test]
    fn aulc_examples() {
        let curve = |vals: &[f64]| -> Vec<EvalRecord> {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| EvalRecord { step: (i + 1) * 100, mean_return: v, std_return: 0.0 })
                .collect()
        };
        assert_eq!(aulc(&curve(&[3.0, 3.0, 3.0])), 3.0);
        assert_eq!(aulc(&curve(&[7.5])), 7.5);
        // Linear ramp 0..R averages to R/2.
        let k = 11;
        let ramp: Vec<f64> = (0..k).map(|i| 10.0 * i as f64 / (k - 1) as f64).collect();
        assert!((aulc(&curve(&ramp)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn aulc_invariant_to_duplication() {
        let base: Vec<EvalRecord> = [1.0, 4.0, 2.5]
            .iter()
            .enumerate()
            .map(|(i, &v)| EvalRecord { step: i, mean_return: v, std_return: 0.0 })
            .collect();
        let doubled: Vec<EvalRecord> = base.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        assert!((aulc(&base) - aulc(&doubled)).abs() < 1e-12);
    }

    #[test]
    fn rank_single_env() {
        let t = table(&[("a", &[("e", 3.0)]), ("b", &[("e", 1.0)]), ("c", &[("e", 2.0)])]);
        let ranks = rank_table(&t, true).unwrap();
        assert_eq!(ranks["a"], 1.0);
        assert_eq!(ranks["b"], 3.0);
        assert_eq!(ranks["c"], 2.0);
    }

    #[test]
    fn rank_tie_averaging() {
        let t = table(&[("a", &[("e", 10.0)]), ("b", &[("e", 10.0)]), ("c", &[("e", 5.0)])]);
        let ranks = rank_table(&t, true).unwrap();
        assert_eq!(ranks["a"], 1.5);
        assert_eq!(ranks["b"], 1.5);
        assert_eq!(ranks["c"], 3.0);
    }

    #[test]
    fn rank_opposite_orderings_balance() {
        let t = table(&[
            ("a", &[("e1", 1.0), ("e2", 2.0)]),
            ("b", &[("e1", 2.0), ("e2", 1.0)]),
        ]);
        let ranks = rank_table(&t, true).unwrap();
        assert_eq!(ranks["a"], 1.5);
        assert_eq!(ranks["b"], 1.5);
    }

    #[test]
    fn rank_missing_cell_is_an_error() {
        let t = table(&[("a", &[("e1", 1.0), ("e2", 2.0)]), ("b", &[("e1", 2.0)])]);
        assert!(rank_table(&t, true).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let actor = Actor::new(3, 1, &[8], &mut r);
        let (m1, s1) = evaluate(&actor, EnvKind::Pendulum, 3, 123);
        let (m2, s2) = evaluate(&actor, EnvKind::Pendulum, 3, 123);
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn zero_actor_on_pendulum_returns_bounded() {
        let net = Mlp::zeros(3, &[4], 2);
        let actor = Actor { opt: AdamState::new(&net), net, act_dim: 1 };
        let (mean, _) = evaluate(&actor, EnvKind::Pendulum, 5, 9);
        assert!((0.0..=200.0).contains(&mean));
    }

    #[test]
    fn constant_reward_episode_sums_to_len_times_c() {
        // A zero actor parked at the pointreach origin earns exp(0) = 1
        // every step, so the return is exactly the episode length.
        let net = Mlp::zeros(4, &[4], 4);
        let actor = Actor { opt: AdamState::new(&net), net, act_dim: 2 };
        let state = crate::env::EnvState { vec: vec![0.0; 4], steps: 0 };
        let obs = EnvKind::PointReach.observe(&state);
        let total = episode_return(&actor, EnvKind::PointReach, state, obs);
        assert_eq!(total, 100.0);
    }

    proptest! {
        #[test]
        fn iqm_is_monotone(mut values in proptest::collection::vec(-100.0..100.0f64, 1..20), idx in 0usize..20, bump in 0.0..10.0f64) {
            let idx = idx % values.len();
            let before = iqm(&values);
            values[idx] += bump;
            let after = iqm(&values);
            prop_assert!(after >= before - 1e-9);
        }

        #[test]
        fn rank_sums_without_ties(vals in proptest::collection::vec(-100.0..100.0f64, 3)) {
            prop_assume!(vals[0] != vals[1] && vals[1] != vals[2] && vals[0] != vals[2]);
            let t = table(&[("a", &[("e", vals[0])]), ("b", &[("e", vals[1])]), ("c", &[("e", vals[2])])]);
            let ranks = rank_table(&t, true).unwrap();
            let sum: f64 = ranks.values().sum();
            prop_assert!((sum - 6.0).abs() < 1e-9);
        }
    }
}
