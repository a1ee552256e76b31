//! Counterfactual replay augmentation.
//!
//! Transitions that share uncontrollable state dimensions can exchange them
//! without changing anything reward-relevant: the swapped dimensions have no
//! causal edge into the reward, so the source's action and reward remain
//! valid for the synthesized state. A pass plans swaps over an immutable
//! snapshot of a batch, then materializes the counterfactual transitions with
//! a `synthetic` provenance flag; synthesized rows are never swap sources
//! within the pass that created them.
//!
//! Partner draws use a counter-based RNG keyed by `(pass seed, source
//! index)`, so the plan is deterministic regardless of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::causal::{uncontrollable_set, CausalMatrices, UncontrollableSet};
use crate::envs::Transition;

/// A planned swap: exchange `shared_dims` between a source and a partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapPlan {
    pub source_index: usize,
    pub partner_index: usize,
    /// Sorted, nonempty set of state dimensions to exchange.
    pub shared_dims: Vec<usize>,
}

/// Outcome counters of one planning pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwapStats {
    pub sources: usize,
    pub skipped: usize,
    pub additions: usize,
}

/// Maximum uniform partner redraws before a source is skipped.
const PARTNER_RETRIES: usize = 8;

/// Builds the counterfactual transition: `dims` of the state and successor
/// come from the partner; action, reward, and done flag come from the source.
pub fn counterfactual_swap(t: &Transition, t_hat: &Transition, dims: &[usize]) -> Transition {
    assert!(!dims.is_empty(), "empty swap dimension set rejected");
    assert_eq!(t.s.len(), t_hat.s.len(), "state dimension mismatch");
    assert_eq!(t.a.len(), t_hat.a.len(), "action dimension mismatch");
    let mut s = t.s.clone();
    let mut s_next = t.s_next.clone();
    for &d in dims {
        assert!(d < s.len(), "swap dimension {d} out of range");
        s[d] = t_hat.s[d];
        s_next[d] = t_hat.s_next[d];
    }
    Transition {
        s,
        a: t.a.clone(),
        r: t.r,
        s_next,
        done: t.done,
        synthetic: true,
    }
}

/// Plans swaps for a `rate` fraction of the batch. Each selected source draws
/// a uniform partner until one shares at least one uncontrollable dimension
/// (up to a small retry budget); sources without a viable partner are skipped
/// and counted. `u_sets[i]` is the uncontrollable set attributed to batch
/// entry `i`.
pub fn plan_swaps(
    batch: &[Transition],
    u_sets: &[UncontrollableSet],
    rate: f64,
    seed: u64,
) -> (Vec<SwapPlan>, SwapStats) {
    plan_swaps_with_sources(batch, u_sets, 0, rate, seed)
}

/// Like [`plan_swaps`], but only entries at `source_start..` are eligible as
/// swap sources (partners still come from the whole batch). The training
/// loop uses this so each real transition is offered as a source at most
/// once across refits, which keeps the synthetic fraction of the causal
/// buffer bounded by `rate / (1 + rate)`.
pub fn plan_swaps_with_sources(
    batch: &[Transition],
    u_sets: &[UncontrollableSet],
    source_start: usize,
    rate: f64,
    seed: u64,
) -> (Vec<SwapPlan>, SwapStats) {
    assert_eq!(batch.len(), u_sets.len(), "one uncontrollable set per entry");
    assert!((0.0..=1.0).contains(&rate), "rate must be in [0, 1]");
    assert!(source_start <= batch.len());
    let n = batch.len();
    let pool = n - source_start;
    let n_sources = (rate * pool as f64).floor() as usize;
    let mut stats = SwapStats {
        sources: n_sources,
        ..SwapStats::default()
    };
    let mut plans = Vec::with_capacity(n_sources);
    if n < 2 || n_sources == 0 {
        stats.skipped = n_sources;
        return (plans, stats);
    }

    // Random distinct sources from the eligible pool, order-stable under the
    // pass seed.
    let mut order: Vec<usize> = (source_start..n).collect();
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(seed);
    for i in (1..pool).rev() {
        let j = shuffle_rng.gen_range(0..=i);
        order.swap(i, j);
    }

    for &source in order.iter().take(n_sources) {
        if u_sets[source].is_empty() {
            stats.skipped += 1;
            continue;
        }
        // Counter-based stream keyed by the source index.
        let mut rng =
            ChaCha12Rng::seed_from_u64(seed ^ (source as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut found = false;
        for _ in 0..PARTNER_RETRIES {
            let partner = rng.gen_range(0..n);
            if partner == source {
                continue;
            }
            let shared = u_sets[source].intersect(&u_sets[partner]);
            if !shared.is_empty() {
                plans.push(SwapPlan {
                    source_index: source,
                    partner_index: partner,
                    shared_dims: shared,
                });
                found = true;
                break;
            }
        }
        if !found {
            stats.skipped += 1;
        }
    }
    stats.additions = plans.len();
    (plans, stats)
}

/// One full augmentation pass over `batch`: computes the (global) per-entry
/// uncontrollable sets from the fitted matrices, plans swaps for a `rate`
/// fraction, and materializes the counterfactual transitions. Only
/// non-synthetic entries are eligible as sources or partners, so synthesized
/// rows never compound. Returns the new transitions and the pass counters.
pub fn augment_batch(
    batch: &[Transition],
    matrices: &CausalMatrices,
    theta: f64,
    rate: f64,
    seed: u64,
) -> (Vec<Transition>, SwapStats) {
    augment_batch_tail(batch, matrices, theta, rate, usize::MAX, seed)
}

/// [`augment_batch`] restricted to the newest `source_tail` real entries as
/// swap sources (partners come from the whole real batch).
pub fn augment_batch_tail(
    batch: &[Transition],
    matrices: &CausalMatrices,
    theta: f64,
    rate: f64,
    source_tail: usize,
    seed: u64,
) -> (Vec<Transition>, SwapStats) {
    let real: Vec<&Transition> = batch.iter().filter(|t| !t.synthetic).collect();
    let u = uncontrollable_set(matrices, theta);
    let pool = source_tail.min(real.len());
    let n_sources = (rate * pool as f64).floor() as usize;
    if u.is_empty() || rate == 0.0 || real.len() < 2 {
        return (
            Vec::new(),
            SwapStats {
                sources: n_sources,
                skipped: n_sources,
                additions: 0,
            },
        );
    }
    // One fitted snapshot applies to the whole batch.
    let owned: Vec<Transition> = real.iter().map(|t| (*t).clone()).collect();
    let u_sets = vec![u; owned.len()];
    let source_start = owned.len() - pool;
    let (plans, stats) = plan_swaps_with_sources(&owned, &u_sets, source_start, rate, seed);
    let synthetic: Vec<Transition> = plans
        .iter()
        .map(|p| {
            counterfactual_swap(&owned[p.source_index], &owned[p.partner_index], &p.shared_dims)
        })
        .collect();
    (synthetic, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::CausalMatrices;
    use crate::envs::{random_rollout, EnvSpec};

    fn transition(s: Vec<f64>, a: Vec<f64>, r: f64, s_next: Vec<f64>) -> Transition {
        Transition {
            s,
            a,
            r,
            s_next,
            done: false,
            synthetic: false,
        }
    }

    fn uset(indices: Vec<usize>) -> UncontrollableSet {
        UncontrollableSet {
            indices,
            theta: 0.05,
        }
    }

    #[test]
    fn swap_replaces_exactly_the_requested_dims() {
        let t = transition(vec![1.0, 2.0, 3.0], vec![0.5], 7.0, vec![1.1, 2.2, 3.3]);
        let t_hat = transition(vec![9.0, 8.0, 7.0], vec![-0.5], -7.0, vec![9.9, 8.8, 7.7]);
        let out = counterfactual_swap(&t, &t_hat, &[2]);
        assert_eq!(out.s, vec![1.0, 2.0, 7.0]);
        assert_eq!(out.s_next, vec![1.1, 2.2, 7.7]);
        assert_eq!(out.a, t.a);
        assert_eq!(out.r, t.r);
        assert_eq!(out.done, t.done);
        assert!(out.synthetic);
    }

    #[test]
    fn self_swap_is_identity_up_to_provenance() {
        let t = transition(vec![1.0, 2.0, 3.0], vec![0.1], 0.5, vec![0.9, 1.9, 2.9]);
        let out = counterfactual_swap(&t, &t, &[0, 1, 2]);
        assert_eq!(out.s, t.s);
        assert_eq!(out.s_next, t.s_next);
        assert_eq!(out.a, t.a);
        assert_eq!(out.r, t.r);
        assert!(out.synthetic);
    }

    #[test]
    #[should_panic]
    fn empty_dims_rejected() {
        let t = transition(vec![1.0], vec![0.0], 0.0, vec![1.0]);
        counterfactual_swap(&t, &t, &[]);
    }

    #[test]
    fn reacher_reward_reevaluation_is_exact_on_ground_truth_swaps() {
        let spec = EnvSpec::distractor_reacher(6);
        let ts = random_rollout(&spec, 400, 17);
        let dims = spec.distractor_indices();
        for (i, j) in [(0usize, 399usize), (10, 77), (200, 5), (321, 123)] {
            let synth = counterfactual_swap(&ts[i], &ts[j], &dims);
            let re = spec.reward(&synth.s, &synth.a);
            assert_eq!(
                re.to_bits(),
                synth.r.to_bits(),
                "reward re-evaluation differs on swap ({i},{j})"
            );
        }
    }

    #[test]
    fn velocity_variant_swaps_stay_reward_consistent() {
        // Velocity dims are mask-1 by construction, so ground-truth swaps
        // only touch distractors and the reward re-evaluation stays exact.
        let spec = EnvSpec::distractor_reacher_with_velocity(4);
        let ts = random_rollout(&spec, 300, 23);
        let dims = spec.distractor_indices();
        assert_eq!(dims, vec![6, 7, 8, 9]);
        for (i, j) in [(0usize, 299usize), (42, 137), (250, 11)] {
            let synth = counterfactual_swap(&ts[i], &ts[j], &dims);
            let re = spec.reward(&synth.s, &synth.a);
            assert_eq!(re.to_bits(), synth.r.to_bits());
        }
    }

    #[test]
    fn empty_uncontrollable_sets_give_empty_plan() {
        let batch = vec![
            transition(vec![1.0, 2.0], vec![0.0], 0.0, vec![1.0, 2.0]),
            transition(vec![3.0, 4.0], vec![0.0], 0.0, vec![3.0, 4.0]),
        ];
        let u_sets = vec![uset(vec![]), uset(vec![])];
        let (plans, stats) = plan_swaps(&batch, &u_sets, 1.0, 0);
        assert!(plans.is_empty());
        assert_eq!(stats.skipped, 2);
    }

    #[test]
    fn full_rate_with_shared_dims_plans_everyone() {
        let batch = vec![
            transition(vec![0.0; 5], vec![0.0], 0.0, vec![0.0; 5]),
            transition(vec![1.0; 5], vec![0.0], 0.0, vec![1.0; 5]),
        ];
        let u_sets = vec![uset(vec![3, 4]), uset(vec![3, 4])];
        let (plans, stats) = plan_swaps(&batch, &u_sets, 1.0, 1);
        assert_eq!(plans.len(), 2);
        assert_eq!(stats.skipped, 0);
        for p in &plans {
            assert_ne!(p.source_index, p.partner_index);
            assert!(!p.shared_dims.is_empty());
            assert!(p.shared_dims.iter().all(|d| [3, 4].contains(d)));
        }
    }

    #[test]
    fn thousand_transition_plan_has_exact_size_and_distractor_dims_only() {
        let spec = EnvSpec::distractor_reacher(8);
        let ts = random_rollout(&spec, 1000, 3);
        let truth = uset(spec.distractor_indices());
        let u_sets = vec![truth; 1000];
        let (plans, stats) = plan_swaps(&ts, &u_sets, 0.5, 9);
        assert_eq!(plans.len(), 500);
        assert_eq!(stats.skipped, 0);
        let distractors = spec.distractor_indices();
        for p in &plans {
            assert!(p.shared_dims.iter().all(|d| distractors.contains(d)));
        }
    }

    #[test]
    fn augment_batch_theta_zero_and_rate_zero_add_nothing() {
        let spec = EnvSpec::distractor_reacher(4);
        let ts = random_rollout(&spec, 100, 5);
        let m = CausalMatrices::from_rows(vec![0.5; spec.d_s], vec![0.5; spec.d_a]);
        let (added, _) = augment_batch(&ts, &m, 0.0, 0.5, 0);
        assert!(added.is_empty(), "theta = 0 means empty uncontrollable set");
        let m2 = CausalMatrices::from_rows(vec![0.0; spec.d_s], vec![0.5; spec.d_a]);
        let (added2, _) = augment_batch(&ts, &m2, 0.1, 0.0, 0);
        assert!(added2.is_empty(), "rate = 0 adds nothing");
    }

    #[test]
    fn augment_batch_adds_the_planned_fraction() {
        let spec = EnvSpec::distractor_reacher(8);
        let ts = random_rollout(&spec, 10_000, 2);
        // Matrices whose standardized row keeps task dims and drops
        // distractors, as a fit would.
        let mut s_row = vec![0.5; 4];
        s_row.extend(vec![0.0; 8]);
        let m = CausalMatrices::from_rows(s_row, vec![0.3, 0.3]);
        let (added, stats) = augment_batch(&ts, &m, 0.05, 0.5, 11);
        assert!(
            (4000..=5000).contains(&added.len()),
            "additions {} outside [0.4, 0.5] * 10^4",
            added.len()
        );
        assert_eq!(stats.additions, added.len());
        assert!(added.iter().all(|t| t.synthetic));
    }

    #[test]
    fn synthetic_rows_are_never_sources_or_partners() {
        let spec = EnvSpec::distractor_reacher(4);
        let mut ts = random_rollout(&spec, 200, 8);
        let mut s_row = vec![0.5; 4];
        s_row.extend(vec![0.0; 4]);
        let m = CausalMatrices::from_rows(s_row, vec![0.3, 0.3]);
        let (first, _) = augment_batch(&ts, &m, 0.05, 1.0, 3);
        ts.extend(first.clone());
        // A second pass over the mixed batch plans only over real rows.
        let (second, stats) = augment_batch(&ts, &m, 0.05, 1.0, 4);
        assert_eq!(stats.sources, 200);
        assert!(second.len() <= 200);

        // Poison the synthetic rows: if any were used as a source or
        // partner, NaN would leak into the output.
        let mut poisoned = ts.clone();
        for t in poisoned.iter_mut().filter(|t| t.synthetic) {
            t.s.iter_mut().for_each(|v| *v = f64::NAN);
            t.s_next.iter_mut().for_each(|v| *v = f64::NAN);
        }
        let (third, _) = augment_batch(&poisoned, &m, 0.05, 1.0, 4);
        assert_eq!(third.len(), second.len());
        assert!(third.iter().all(|t| t.is_finite()));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

            /// Mask-1 dims, action, and reward of every synthetic transition
            /// are bit-identical to the source's.
            #[test]
            fn reward_relevant_content_is_conserved(seed in 0u64..500, rate in 0.1f64..1.0) {
                let spec = EnvSpec::distractor_reacher(5);
                let ts = random_rollout(&spec, 120, seed);
                let mut s_row = vec![0.5; 4];
                s_row.extend(vec![0.0; 5]);
                let m = CausalMatrices::from_rows(s_row, vec![0.3, 0.3]);
                let u = crate::causal::uncontrollable_set(&m, 0.05);
                let u_sets = vec![u; ts.len()];
                let (plans, _) = plan_swaps(&ts, &u_sets, rate, seed);
                for p in &plans {
                    let synth = counterfactual_swap(&ts[p.source_index], &ts[p.partner_index], &p.shared_dims);
                    let src = &ts[p.source_index];
                    prop_assert_eq!(synth.r.to_bits(), src.r.to_bits());
                    prop_assert_eq!(synth.done, src.done);
                    for (x, y) in synth.a.iter().zip(&src.a) {
                        prop_assert_eq!(x.to_bits(), y.to_bits());
                    }
                    for i in 0..spec.d_s {
                        if !p.shared_dims.contains(&i) {
                            prop_assert_eq!(synth.s[i].to_bits(), src.s[i].to_bits());
                            prop_assert_eq!(synth.s_next[i].to_bits(), src.s_next[i].to_bits());
                        }
                    }
                }
            }

            /// Plans are a pure function of (batch, sets, rate, seed).
            #[test]
            fn planning_is_deterministic(seed in 0u64..500) {
                let spec = EnvSpec::distractor_reacher(3);
                let ts = random_rollout(&spec, 64, seed);
                let u = uset(spec.distractor_indices());
                let u_sets = vec![u; ts.len()];
                let (a, sa) = plan_swaps(&ts, &u_sets, 0.7, seed);
                let (b, sb) = plan_swaps(&ts, &u_sets, 0.7, seed);
                prop_assert_eq!(a, b);
                prop_assert_eq!(sa, sb);
            }
        }
    }
}
