//! Evaluation summaries: normalized score and optimality gap against bundled
//! reference controllers.
//!
//! Returns are scaled between a uniform-random policy and a scripted
//! proportional controller:
//!
//! ```text
//! normalized = 100 * (x - random) / (oracle - random)      (clipped below 0)
//! gap        = mean over seeds of max(0, 1 - normalized/100)
//! ```
//!
//! Both references are computed by rollouts, never hardcoded, and cached in
//! run manifests by the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::agent::EpisodeRow;
use crate::envs::{Env, EnvSpec};

/// Number of reference episodes rolled out per policy.
pub const REFERENCE_EPISODES: usize = 20;

/// Scripted proportional controller: aim straight at the goal at maximum
/// feasible speed on the live action dimensions.
pub fn scripted_controller_action(spec: &EnvSpec, state: &[f64]) -> Vec<f64> {
    let g = if spec.with_velocity { 4 } else { 2 };
    let mut a = vec![0.0; spec.d_a];
    for i in 0..2usize.min(spec.live_action_dims) {
        let err = state[g + i] - state[i];
        if spec.with_velocity {
            let vel = state[2 + i];
            a[i] = (4.0 * err - 1.0 * vel).clamp(-1.0, 1.0);
        } else {
            a[i] = (err / (spec.dt * spec.v_scale)).clamp(-1.0, 1.0);
        }
    }
    a
}

/// Mean return of `policy` over `episodes` full episodes.
pub fn rollout_mean_return<F>(spec: &EnvSpec, episodes: usize, seed: u64, mut policy: F) -> f64
where
    F: FnMut(&[f64], &mut ChaCha12Rng) -> Vec<f64>,
{
    let mut env = Env::new(spec.clone(), seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x1f3d_5b79_9e37_79b9);
    let mut total = 0.0;
    for ep in 0..episodes {
        let mut s = env.reset(seed.wrapping_add(ep as u64));
        loop {
            let a = policy(&s, &mut rng);
            let out = env.step(&a);
            total += out.reward;
            if out.done {
                break;
            }
            s = out.next_state;
        }
    }
    total / episodes as f64
}

/// Reference returns for normalization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReferenceReturns {
    pub random: f64,
    pub oracle: f64,
}

pub fn reference_returns(spec: &EnvSpec, seed: u64) -> ReferenceReturns {
    let random = rollout_mean_return(spec, REFERENCE_EPISODES, seed, |_, rng| {
        (0..spec.d_a).map(|_| rng.gen_range(-1.0..1.0)).collect()
    });
    let oracle = rollout_mean_return(spec, REFERENCE_EPISODES, seed, |s, _| {
        scripted_controller_action(spec, s)
    });
    ReferenceReturns { random, oracle }
}

/// `100 (x - random) / (oracle - random)`, clipped below at 0 (can exceed
/// 100 when a policy beats the scripted controller).
pub fn normalized_score(mean_return: f64, refs: &ReferenceReturns) -> f64 {
    let denom = refs.oracle - refs.random;
    assert!(
        denom.abs() > 1e-12,
        "degenerate references: oracle == random"
    );
    (100.0 * (mean_return - refs.random) / denom).max(0.0)
}

/// Mean over seeds of `max(0, 1 - normalized/100)`.
pub fn optimality_gap(normalized_scores: &[f64]) -> f64 {
    assert!(!normalized_scores.is_empty());
    normalized_scores
        .iter()
        .map(|s| (1.0 - s / 100.0).max(0.0))
        .sum::<f64>()
        / normalized_scores.len() as f64
}

/// Mean return over the final `window` episodes of a run.
pub fn final_mean_return(rows: &[EpisodeRow], window: usize) -> f64 {
    assert!(!rows.is_empty(), "no episodes recorded");
    let start = rows.len().saturating_sub(window);
    let tail = &rows[start..];
    tail.iter().map(|r| r.ret).sum::<f64>() / tail.len() as f64
}

/// Area under the return curve, computed as the mean per-episode return over
/// the whole run (episodes are fixed-length, so this is proportional to the
/// integral of return over environment steps).
pub fn return_auc(rows: &[EpisodeRow]) -> f64 {
    assert!(!rows.is_empty(), "no episodes recorded");
    rows.iter().map(|r| r.ret).sum::<f64>() / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_scores_100_random_scores_0_midpoint_50() {
        let spec = EnvSpec::distractor_reacher(0);
        let refs = reference_returns(&spec, 3);
        assert!(refs.oracle > refs.random, "controller must beat random");
        assert_eq!(normalized_score(refs.oracle, &refs), 100.0);
        assert_eq!(normalized_score(refs.random, &refs), 0.0);
        let mid = 0.5 * (refs.oracle + refs.random);
        assert!((normalized_score(mid, &refs) - 50.0).abs() < 1e-9);

        assert_eq!(optimality_gap(&[100.0]), 0.0);
        assert_eq!(optimality_gap(&[0.0]), 1.0);
        assert!((optimality_gap(&[50.0, 100.0]) - 0.25).abs() < 1e-12);
        // Scores above 100 do not produce negative gaps.
        assert_eq!(optimality_gap(&[140.0]), 0.0);
    }

    #[test]
    fn scripted_controller_reaches_the_goal() {
        let spec = EnvSpec::distractor_reacher(4);
        let mut env = Env::new(spec.clone(), 11);
        let mut s = env.reset(42);
        let mut last_dist = f64::MAX;
        for _ in 0..spec.episode_horizon {
            let out = env.step(&scripted_controller_action(&spec, &s));
            last_dist = out.dist;
            if out.done {
                break;
            }
            s = out.next_state;
        }
        assert!(
            last_dist <= spec.success_radius,
            "controller ended {last_dist} from goal"
        );
    }

    #[test]
    fn controller_solves_dead_actuator_and_velocity_variants() {
        for spec in [
            EnvSpec::dead_actuator(4),
            EnvSpec::distractor_reacher_with_velocity(2),
        ] {
            let mut env = Env::new(spec.clone(), 5);
            let mut s = env.reset(7);
            let mut last_dist = f64::MAX;
            for _ in 0..spec.episode_horizon {
                let out = env.step(&scripted_controller_action(&spec, &s));
                last_dist = out.dist;
                if out.done {
                    break;
                }
                s = out.next_state;
            }
            assert!(
                last_dist <= spec.success_radius,
                "{}: controller ended {last_dist} from goal",
                spec.name
            );
        }
    }

    #[test]
    fn final_mean_and_auc() {
        let mk = |ret: f64| EpisodeRow {
            step: 0,
            episode: 0,
            ret,
            success: false,
            critic_loss: 0.0,
            policy_loss: 0.0,
            inverse_nll: 0.0,
            empowerment_mean: 0.0,
            synthetic_fraction: 0.0,
            wallclock_s: 0.0,
        };
        let rows: Vec<EpisodeRow> = [1.0, 2.0, 3.0, 4.0].into_iter().map(mk).collect();
        assert_eq!(final_mean_return(&rows, 2), 3.5);
        assert_eq!(return_auc(&rows), 2.5);
    }
}
