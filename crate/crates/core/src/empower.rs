//! Inverse dynamics model and the causally weighted empowerment estimate.
//!
//! Empowerment here is the gap between two weighted entropies evaluated at an
//! action sample: the policy's (how diverse behavior is) minus the inverse
//! dynamics model's (how predictable the action is once the state change is
//! seen). Per-dimension terms carry the action weights `omega`, so dimensions
//! without causal influence on reward contribute nothing.
//!
//! Both densities are evaluated over the squashed action space (Gaussian
//! density of the raw action plus the tanh change-of-variables correction),
//! so the corrections cancel exactly in the difference and an inverse model
//! that matches the policy yields an estimate of exactly zero.

use crate::causal::ActionWeights;
use crate::envs::Transition;
use crate::error::{CoreError, Result};
use crate::numkit::{
    atanh_clamped, gaussian_head_sample, split_head, squashed_log_prob_dim, AdamState,
    GaussianHeadOutput, MlpGradients, MlpParams,
};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Density model of the action given consecutive states: an MLP from
/// `[s, s_next]` to a `[mean | log_std]` head over the raw action dimensions.
#[derive(Debug, Clone)]
pub struct InverseDynamicsModel {
    net: MlpParams,
    adam: AdamState,
    d_a: usize,
}

impl InverseDynamicsModel {
    pub fn new(d_s: usize, d_a: usize, hidden: &[usize], rng: &mut impl rand::Rng) -> Self {
        let mut dims = vec![2 * d_s];
        dims.extend_from_slice(hidden);
        dims.push(2 * d_a);
        let net = MlpParams::new(&dims, rng);
        let adam = AdamState::new(&net);
        InverseDynamicsModel { net, adam, d_a }
    }

    /// All-zero network: every head is `N(0, 1)` regardless of input.
    pub fn zeros(d_s: usize, d_a: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![2 * d_s];
        dims.extend_from_slice(hidden);
        dims.push(2 * d_a);
        let net = MlpParams::zeros(&dims);
        let adam = AdamState::new(&net);
        InverseDynamicsModel { net, adam, d_a }
    }

    pub fn net(&self) -> &MlpParams {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpParams {
        &mut self.net
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    /// Head (mean, clamped log_std) at `(s, s_next)`.
    pub fn head(&self, s: &[f64], s_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut input = Vec::with_capacity(s.len() + s_next.len());
        input.extend_from_slice(s);
        input.extend_from_slice(s_next);
        let out = self.net.forward(&input);
        let (mean, log_std) = split_head(&out);
        (
            mean.to_vec(),
            log_std.iter().map(|v| crate::numkit::clamp_log_std(*v)).collect(),
        )
    }

    /// Per-dimension log density of the squashed action `a` under the model
    /// conditioned on `(s, s_next)`.
    pub fn log_prob_dims(&self, s: &[f64], s_next: &[f64], a: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.d_a, "action length mismatch");
        let (mean, log_std) = self.head(s, s_next);
        (0..self.d_a)
            .map(|i| squashed_log_prob_dim(mean[i], log_std[i], a[i]))
            .collect()
    }
}

/// One maximum-likelihood gradient step on the per-dimension Gaussian NLL of
/// the taken raw actions (recovered by clamped `atanh`). Returns the mean
/// per-dimension NLL, or `None` for an empty batch (no-op). A non-finite
/// loss or gradient rejects the update and leaves the model untouched.
pub fn fit_inverse_dynamics(
    model: &mut InverseDynamicsModel,
    batch: &[Transition],
    lr: f64,
) -> Result<Option<f64>> {
    if batch.is_empty() {
        return Ok(None);
    }
    let d_a = model.d_a;
    let b = batch.len() as f64;
    let mut grads = MlpGradients::zeros_like(&model.net);
    let mut total_nll = 0.0;
    for t in batch {
        let mut input = Vec::with_capacity(t.s.len() + t.s_next.len());
        input.extend_from_slice(&t.s);
        input.extend_from_slice(&t.s_next);
        let trace = model.net.forward_trace(&input);
        let out = trace.output();
        let (mean, log_std_raw) = split_head(out);
        let mut upstream = vec![0.0; 2 * d_a];
        for i in 0..d_a {
            let ls = crate::numkit::clamp_log_std(log_std_raw[i]);
            let inv_sigma = (-ls).exp();
            let raw = atanh_clamped(t.a[i]);
            let z = (raw - mean[i]) * inv_sigma;
            total_nll += 0.5 * z * z + ls + HALF_LN_2PI;
            // d NLL / d mean = -z / sigma; d NLL / d log_std = 1 - z^2,
            // gated to zero where the clamp is active.
            upstream[i] = -z * inv_sigma / b;
            let clamped = log_std_raw[i] != ls;
            upstream[d_a + i] = if clamped { 0.0 } else { (1.0 - z * z) / b };
        }
        grads.add_assign(&model.net.backward(&trace, &upstream));
    }
    let mean_nll = total_nll / (b * d_a as f64);
    if !mean_nll.is_finite() {
        return Err(CoreError::NonFinite {
            what: "inverse dynamics NLL".to_string(),
        });
    }
    model.adam.step(&mut model.net, &grads, lr)?;
    Ok(Some(mean_nll))
}

/// Weighted entropy estimate from one fresh policy sample, plus the sample
/// itself (callers reuse it for bootstrap targets).
#[derive(Debug, Clone)]
pub struct PolicyEntropySample {
    /// `-sum_i omega_i log pi(a_i | s)`, single-sample estimator.
    pub value: f64,
    /// `-omega_i log pi(a_i | s)` per dimension.
    pub per_dim: Vec<f64>,
    pub head: GaussianHeadOutput,
}

/// Draws one action through the squashed head at `s` and returns the
/// weighted negative log density.
pub fn weighted_entropy_policy(
    s: &[f64],
    policy: &MlpParams,
    w: &ActionWeights,
    noise: &[f64],
) -> PolicyEntropySample {
    let out = policy.forward(s);
    let (mean, log_std) = split_head(&out);
    assert_eq!(mean.len(), w.d_a(), "policy head/weight mismatch");
    let head = gaussian_head_sample(mean, log_std, noise);
    let per_dim: Vec<f64> = head
        .per_dim_log_prob
        .iter()
        .zip(&w.omega)
        .map(|(lp, wi)| -wi * lp)
        .collect();
    PolicyEntropySample {
        value: per_dim.iter().sum(),
        per_dim,
        head,
    }
}

/// Weighted entropy terms of the inverse model evaluated at a given action.
#[derive(Debug, Clone)]
pub struct WeightedEntropy {
    pub value: f64,
    pub per_dim: Vec<f64>,
}

/// `-sum_i omega_i log P(a_i | s, s_next)` at the taken action.
pub fn weighted_entropy_inverse(
    s: &[f64],
    s_next: &[f64],
    a: &[f64],
    model: &InverseDynamicsModel,
    w: &ActionWeights,
) -> WeightedEntropy {
    let log_probs = model.log_prob_dims(s, s_next, a);
    let per_dim: Vec<f64> = log_probs
        .iter()
        .zip(&w.omega)
        .map(|(lp, wi)| -wi * lp)
        .collect();
    WeightedEntropy {
        value: per_dim.iter().sum(),
        per_dim,
    }
}

/// Causally weighted empowerment at one sample.
#[derive(Debug, Clone)]
pub struct EmpowermentEstimate {
    /// `h_policy - h_inverse`, exactly (computed as that difference).
    pub value: f64,
    pub h_policy: f64,
    pub h_inverse: f64,
    /// `omega_i (log P_inv(a_i) - log pi(a_i))` per dimension.
    pub per_dim: Vec<f64>,
}

/// Evaluates both log densities at the same taken action:
/// `value = sum_i omega_i (log P(a_i | s, s_next) - log pi(a_i | s))`.
pub fn empowerment_term(
    s: &[f64],
    a: &[f64],
    s_next: &[f64],
    policy: &MlpParams,
    model: &InverseDynamicsModel,
    w: &ActionWeights,
) -> EmpowermentEstimate {
    let out = policy.forward(s);
    let (mean, log_std) = split_head(&out);
    assert_eq!(mean.len(), w.d_a(), "policy head/weight mismatch");
    let log_pi: Vec<f64> = (0..a.len())
        .map(|i| squashed_log_prob_dim(mean[i], log_std[i], a[i]))
        .collect();
    let log_inv = model.log_prob_dims(s, s_next, a);
    let mut h_policy = 0.0;
    let mut h_inverse = 0.0;
    let mut per_dim = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let wi = w.omega[i];
        h_policy -= wi * log_pi[i];
        h_inverse -= wi * log_inv[i];
        per_dim.push(wi * (log_inv[i] - log_pi[i]));
    }
    EmpowermentEstimate {
        value: h_policy - h_inverse,
        h_policy,
        h_inverse,
        per_dim,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::ActionWeights;
    use crate::envs::toy::{invertible_system, teleport_system};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn minibatches<'a>(
        data: &'a [Transition],
        size: usize,
        rng: &mut ChaCha12Rng,
    ) -> Vec<&'a Transition> {
        (0..size).map(|_| &data[rng.gen_range(0..data.len())]).collect()
    }

    fn train_inverse(
        model: &mut InverseDynamicsModel,
        data: &[Transition],
        steps: usize,
        lr: f64,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut last = f64::INFINITY;
        for _ in 0..steps {
            let batch: Vec<Transition> = minibatches(data, 256, &mut rng)
                .into_iter()
                .cloned()
                .collect();
            last = fit_inverse_dynamics(model, &batch, lr).unwrap().unwrap();
        }
        last
    }

    #[test]
    fn invertible_system_trains_well_below_marginal_entropy() {
        let data = invertible_system(10_000, 2, 0);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut model = InverseDynamicsModel::new(2, 2, &[64, 64], &mut rng);
        let nll = train_inverse(&mut model, &data, 2000, 1e-3, 2);
        assert!(nll <= -1.0, "converged mean per-dim NLL {nll} > -1.0");
    }

    #[test]
    fn teleport_system_converges_to_the_action_marginal_entropy() {
        let data = teleport_system(10_000, 2, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut model = InverseDynamicsModel::new(2, 2, &[64, 64], &mut rng);
        train_inverse(&mut model, &data, 1500, 1e-3, 5);
        // Evaluate the mean NLL over fresh data without updating.
        let eval = teleport_system(4000, 2, 6);
        let mut total = 0.0;
        for t in &eval {
            let (mean, log_std) = model.head(&t.s, &t.s_next);
            for i in 0..2 {
                let raw = atanh_clamped(t.a[i]);
                let z = (raw - mean[i]) * (-log_std[i]).exp();
                total += 0.5 * z * z + log_std[i] + HALF_LN_2PI;
            }
        }
        let nll = total / (eval.len() as f64 * 2.0);
        let marginal = 1.418_938_5; // raw actions are standard normal
        assert!(
            (nll - marginal).abs() < 0.1,
            "teleport NLL {nll} vs marginal entropy {marginal}"
        );
    }

    #[test]
    fn empty_batch_is_a_noop() {
        let mut model = InverseDynamicsModel::zeros(3, 2, &[8]);
        let before = model.net.clone();
        let out = fit_inverse_dynamics(&mut model, &[], 1e-3).unwrap();
        assert!(out.is_none());
        assert!(model.net.bit_eq(&before));
    }

    #[test]
    fn unit_weights_reduce_to_unweighted_entropy_estimator() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let policy = MlpParams::new(&[3, 16, 4], &mut rng);
        let w = ActionWeights::uniform(2);
        let s = [0.2, -0.4, 0.6];
        let noise = [0.3, -1.1];
        let sample = weighted_entropy_policy(&s, &policy, &w, &noise);
        let direct: f64 = sample.head.per_dim_log_prob.iter().map(|lp| -lp).sum();
        assert!((sample.value - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_dimension_contributes_nothing() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let policy = MlpParams::new(&[2, 16, 4], &mut rng);
        let w = ActionWeights {
            omega: vec![2.0, 0.0],
            normalization: "sum-to-da".into(),
        };
        let sample = weighted_entropy_policy(&[0.1, 0.9], &policy, &w, &[1.4, -0.2]);
        assert_eq!(sample.per_dim[1], 0.0);
        assert_eq!(sample.value, sample.per_dim[0]);
    }

    #[test]
    fn monte_carlo_weighted_entropy_matches_closed_form_no_squash() {
        // Diagonal Gaussian without squashing: E[-sum w_i log N_i] equals
        // sum w_i (0.5 ln(2 pi e) + log sigma_i).
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (mean, log_std) = ([0.3, -0.5], [0.2f64, -0.7f64]);
        let w = [1.0, 1.0];
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            for i in 0..2 {
                let z: f64 = rng.sample(StandardNormal);
                let x = mean[i] + log_std[i].exp() * z;
                acc -= w[i] * crate::numkit::gaussian_log_prob_dim(mean[i], log_std[i], x);
            }
        }
        let est = acc / n as f64;
        let closed: f64 = (0..2)
            .map(|i| w[i] * (0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + log_std[i]))
            .sum();
        assert!(
            (est - closed).abs() / closed.abs() < 0.01,
            "MC {est} vs closed form {closed}"
        );
    }

    #[test]
    fn untrained_unit_head_at_zero_action_gives_standard_normal_nll() {
        let model = InverseDynamicsModel::zeros(3, 2, &[8]);
        let w = ActionWeights {
            omega: vec![0.5, 2.0],
            normalization: "sum-to-da".into(),
        };
        let e = weighted_entropy_inverse(&[0.0; 3], &[0.0; 3], &[0.0, 0.0], &model, &w);
        assert!((e.per_dim[0] - 0.5 * 0.918_938_5).abs() < 1e-4);
        assert!((e.per_dim[1] - 2.0 * 0.918_938_5).abs() < 1e-4);

        let wz = ActionWeights {
            omega: vec![0.0, 0.0],
            normalization: "sum-to-da".into(),
        };
        let ez = weighted_entropy_inverse(&[0.0; 3], &[0.0; 3], &[0.3, -0.3], &model, &wz);
        assert_eq!(ez.value, 0.0);
    }

    #[test]
    fn trained_inverse_is_sharper_than_the_policy_on_invertible_data() {
        let data = invertible_system(10_000, 2, 10);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut model = InverseDynamicsModel::new(2, 2, &[64, 64], &mut rng);
        train_inverse(&mut model, &data, 1500, 1e-3, 12);
        // The behavior policy is N(0,1) per raw dim, state-independent.
        let policy = MlpParams::zeros(&[2, 4]);
        let w = ActionWeights::uniform(2);
        let eval = invertible_system(2000, 2, 13);
        let mut pol = 0.0;
        let mut inv = 0.0;
        for t in &eval {
            let est = empowerment_term(&t.s, &t.a, &t.s_next, &policy, &model, &w);
            pol += est.h_policy;
            inv += est.h_inverse;
        }
        assert!(
            inv / eval.len() as f64 + 0.5 < pol / eval.len() as f64,
            "inverse entropy {} not clearly below policy entropy {}",
            inv / eval.len() as f64,
            pol / eval.len() as f64
        );
    }

    #[test]
    fn identical_distributions_annihilate_exactly() {
        // Zero-weight nets give N(0,1) heads on both sides; the squash
        // corrections cancel term by term.
        let policy = MlpParams::zeros(&[3, 4]);
        let model = InverseDynamicsModel::zeros(3, 2, &[4]);
        let w = ActionWeights {
            omega: vec![1.3, 0.2],
            normalization: "sum-to-da".into(),
        };
        for a in [[0.0, 0.0], [0.5, -0.8], [0.999, 0.123]] {
            let est = empowerment_term(&[0.1, 0.2, 0.3], &a, &[0.9, 0.8, 0.7], &policy, &model, &w);
            assert_eq!(est.value, 0.0, "value must vanish exactly at {a:?}");
            assert!(est.per_dim.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn zero_weights_give_zero_empowerment() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let policy = MlpParams::new(&[2, 8, 4], &mut rng);
        let model = InverseDynamicsModel::new(2, 2, &[8], &mut rng);
        let w = ActionWeights {
            omega: vec![0.0, 0.0],
            normalization: "sum-to-da".into(),
        };
        let est = empowerment_term(&[0.5, -0.5], &[0.2, 0.4], &[0.1, 0.1], &policy, &model, &w);
        assert_eq!(est.value, 0.0);
    }

    mod properties {
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha12Rng;

        use crate::causal::ActionWeights;
        use crate::empower::{empowerment_term, InverseDynamicsModel};
        use crate::numkit::MlpParams;

        proptest! {
            #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

            /// value == h_policy - h_inverse by construction, and per-dim
            /// terms sum to it within accumulation error.
            #[test]
            fn decomposition_identity(seed in 0u64..1000) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let policy = MlpParams::new(&[2, 8, 4], &mut rng);
                let model = InverseDynamicsModel::new(2, 2, &[8], &mut rng);
                let w = ActionWeights { omega: vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)], normalization: "sum-to-da".into() };
                let s1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let a = [rng.gen_range(-0.99..0.99), rng.gen_range(-0.99..0.99)];
                let s2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let est = empowerment_term(&s1, &a, &s2, &policy, &model, &w);
                prop_assert_eq!(est.value, est.h_policy - est.h_inverse);
                let sum: f64 = est.per_dim.iter().sum();
                prop_assert!((sum - est.value).abs() < 1e-9);
            }

            /// Scaling omega by c > 0 scales the estimate by c and leaves
            /// rankings of states by empowerment unchanged.
            #[test]
            fn weight_linearity_and_rank_invariance(seed in 0u64..1000, c in 0.1f64..10.0) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let policy = MlpParams::new(&[2, 8, 4], &mut rng);
                let model = InverseDynamicsModel::new(2, 2, &[8], &mut rng);
                let w = ActionWeights { omega: vec![0.8, 1.2], normalization: "sum-to-da".into() };
                let w_scaled = ActionWeights { omega: vec![0.8 * c, 1.2 * c], normalization: "sum-to-da".into() };
                let mut base = Vec::new();
                let mut scaled = Vec::new();
                for _ in 0..8 {
                    let s = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let a = [rng.gen_range(-0.99..0.99), rng.gen_range(-0.99..0.99)];
                    let s2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let e1 = empowerment_term(&s, &a, &s2, &policy, &model, &w).value;
                    let e2 = empowerment_term(&s, &a, &s2, &policy, &model, &w_scaled).value;
                    prop_assert!((e2 - c * e1).abs() < 1e-9 * (1.0 + e1.abs()));
                    base.push(e1);
                    scaled.push(e2);
                }
                let rank = |v: &[f64]| {
                    let mut idx: Vec<usize> = (0..v.len()).collect();
                    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
                    idx
                };
                prop_assert_eq!(rank(&base), rank(&scaled));
            }
        }
    }
}
