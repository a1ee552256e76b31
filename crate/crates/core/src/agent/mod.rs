//! Soft actor-critic with causally weighted empowerment.
//!
//! The trainer runs the full pipeline over a seedable environment:
//!
//! 1. Counterfactual data augmentation: on a refit cadence, discover the
//!    state->reward structure on the local causal buffer, compute the
//!    uncontrollable set, and append swapped transitions to both buffers.
//! 2. Causal weight learning: refit the action->reward structure on the
//!    augmented window and derive action weights `omega`.
//! 3. Policy optimization: twin-critic SAC whose Bellman target and policy
//!    objective carry `alpha` times the weighted empowerment instead of the
//!    plain entropy bonus.
//!
//! The Bellman bonus at the bootstrap state pairs a fresh policy sample with
//! realized data: `alpha * (h_policy(s', a') - h_inverse(s, a, s'))`, i.e.
//! the weighted policy entropy uses the same fresh action the target Q uses,
//! while the inverse dynamics term is evaluated on the stored transition. In
//! the policy objective the inverse-model term is treated as a fixed
//! reward-like bonus (no gradient flows through it); the weighted policy
//! log-density term is differentiated through the reparameterized sample.
//!
//! `BaselineSac` mode runs the identical loop with uniform weights, no
//! discovery, no augmentation, and the standard `-log pi` entropy bonus; with
//! `alpha = 0` both modes skip their bonus entirely and produce bit-identical
//! parameter trajectories on a shared seed.

mod metrics;
mod replay;


pub use metrics::{read_metrics_csv, write_metrics_csv, EpisodeRow, METRICS_HEADER};
pub use replay::ReplayBuffer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::causal::{
    fit_state_reward_mask, uncontrollable_set, ActionWeights, CausalMatrices, DiscoveryConfig,
    UncontrollableSet,
};
use crate::empower::{fit_inverse_dynamics, InverseDynamicsModel};
use crate::envs::{Env, EnvSpec, Transition};
use crate::error::{CoreError, Result};
use crate::numkit::{
    clamp_log_std, gaussian_head_sample, split_head, AdamState, MlpGradients, MlpParams,
    EPS_SQUASH, LOG_STD_MAX, LOG_STD_MIN,
};

/// Training hyperparameters. JSON configs mirror these field names exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Empowerment (or entropy, in baseline mode) temperature.
    pub alpha: f64,
    /// Polyak smoothing factor for target critics.
    pub tau: f64,
    /// Environment steps between causal refits; 0 disables discovery and
    /// augmentation entirely (weights stay uniform).
    pub causal_update_interval: usize,
    pub causal_sample_size: usize,
    pub theta: f64,
    pub augment_rate: f64,
    pub total_steps: usize,
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_warmup")]
    pub warmup_steps: usize,
    #[serde(default = "default_replay_capacity")]
    pub replay_capacity: usize,
    #[serde(default = "default_causal_capacity")]
    pub causal_buffer_capacity: usize,
    #[serde(default = "default_target_interval")]
    pub target_update_interval: usize,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_warmup() -> usize {
    1000
}
fn default_replay_capacity() -> usize {
    1_000_000
}
fn default_causal_capacity() -> usize {
    1_000_000
}
fn default_target_interval() -> usize {
    2
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            lr: 3e-4,
            batch_size: 256,
            alpha: 0.2,
            tau: 0.005,
            causal_update_interval: 1000,
            causal_sample_size: 10_000,
            theta: 0.05,
            augment_rate: 0.5,
            total_steps: 100_000,
            seed: 0,
            hidden: default_hidden(),
            warmup_steps: default_warmup(),
            replay_capacity: default_replay_capacity(),
            causal_buffer_capacity: default_causal_capacity(),
            target_update_interval: default_target_interval(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CoreError::invalid_config(field, msg))
            }
        };
        check(
            (0.0..1.0).contains(&self.gamma),
            "gamma",
            "must be in [0, 1)",
        )?;
        check(self.lr > 0.0, "lr", "must be positive")?;
        check(self.batch_size > 0, "batch_size", "must be positive")?;
        check(self.alpha >= 0.0, "alpha", "must be nonnegative")?;
        check(
            self.tau > 0.0 && self.tau <= 1.0,
            "tau",
            "must be in (0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.augment_rate),
            "augment_rate",
            "must be in [0, 1]",
        )?;
        check(self.theta >= 0.0, "theta", "must be nonnegative")?;
        check(!self.hidden.is_empty(), "hidden", "needs at least one layer")?;
        check(
            self.hidden.iter().all(|&h| h > 0),
            "hidden",
            "layer widths must be positive",
        )?;
        check(
            self.target_update_interval > 0,
            "target_update_interval",
            "must be positive",
        )?;
        check(self.replay_capacity > 0, "replay_capacity", "must be positive")?;
        check(
            self.causal_buffer_capacity > 0,
            "causal_buffer_capacity",
            "must be positive",
        )?;
        Ok(())
    }
}

/// Which loop variant runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentMode {
    /// Full pipeline: discovery, augmentation, weighted empowerment bonus.
    Cip,
    /// Plain SAC: uniform weights, no discovery, `-log pi` entropy bonus.
    BaselineSac,
    /// Ablation: discovery and augmentation stay on, but the bonus is the
    /// plain entropy (no inverse-dynamics term, no weights).
    CipNoEmpowerment,
}

impl AgentMode {
    /// Runs causal refits and counterfactual augmentation.
    pub fn augments(self) -> bool {
        matches!(self, AgentMode::Cip | AgentMode::CipNoEmpowerment)
    }

    /// Uses the weighted empowerment bonus (vs plain entropy).
    pub fn weighted_empowerment(self) -> bool {
        matches!(self, AgentMode::Cip)
    }
}

/// Immutable causal snapshot the training loop swaps in at refit boundaries.
#[derive(Debug, Clone)]
pub struct CausalSnapshot {
    pub matrices: CausalMatrices,
    pub weights: ActionWeights,
    pub u_set: UncontrollableSet,
}

impl CausalSnapshot {
    fn zero_knowledge(d_s: usize, d_a: usize, theta: f64) -> Self {
        CausalSnapshot {
            matrices: CausalMatrices::zeros(d_s, d_a),
            weights: ActionWeights::uniform(d_a),
            u_set: UncontrollableSet {
                indices: Vec::new(),
                theta,
            },
        }
    }

    /// FNV-1a over the standardized rows and weights.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        self.matrices.m_s_to_r_std.iter().copied().for_each(&mut eat);
        self.matrices.m_a_to_r_std.iter().copied().for_each(&mut eat);
        self.weights.omega.iter().copied().for_each(&mut eat);
        h
    }
}

/// Recorded at each refit for the metrics stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SnapshotHash {
    pub step: usize,
    pub hash: String,
}

/// Diagnostics counters surfaced by the trainer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub rejected_updates: u64,
    pub action_clamp_events: u64,
}

/// All mutable learner state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub mode: AgentMode,
    pub policy: MlpParams,
    pub q1: MlpParams,
    pub q2: MlpParams,
    pub q1_target: MlpParams,
    pub q2_target: MlpParams,
    pub inverse: InverseDynamicsModel,
    pub snapshot: CausalSnapshot,
    adam_policy: AdamState,
    adam_q1: AdamState,
    adam_q2: AdamState,
    d_s: usize,
    d_a: usize,
    grad_steps: u64,
}

impl AgentState {
    /// Network construction order is fixed (policy, q1, q2, inverse) so both
    /// modes consume the init RNG identically.
    pub fn new(
        config: &AgentConfig,
        d_s: usize,
        d_a: usize,
        mode: AgentMode,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut policy_dims = vec![d_s];
        policy_dims.extend(&config.hidden);
        policy_dims.push(2 * d_a);
        let mut q_dims = vec![d_s + d_a];
        q_dims.extend(&config.hidden);
        q_dims.push(1);

        let policy = MlpParams::new(&policy_dims, rng);
        let q1 = MlpParams::new(&q_dims, rng);
        let q2 = MlpParams::new(&q_dims, rng);
        let inverse = InverseDynamicsModel::new(d_s, d_a, &config.hidden, rng);
        let adam_policy = AdamState::new(&policy);
        let adam_q1 = AdamState::new(&q1);
        let adam_q2 = AdamState::new(&q2);
        AgentState {
            mode,
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            inverse,
            snapshot: CausalSnapshot::zero_knowledge(d_s, d_a, config.theta),
            adam_policy,
            adam_q1,
            adam_q2,
            d_s,
            d_a,
            grad_steps: 0,
        }
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    /// Bit-exact equality of policy, critics, and target critics.
    pub fn params_bit_eq(&self, other: &AgentState) -> bool {
        self.policy.bit_eq(&other.policy)
            && self.q1.bit_eq(&other.q1)
            && self.q2.bit_eq(&other.q2)
            && self.q1_target.bit_eq(&other.q1_target)
            && self.q2_target.bit_eq(&other.q2_target)
    }

    /// Squashed action sampled from the policy at `s`.
    pub fn act<R: Rng>(&self, s: &[f64], rng: &mut R) -> Vec<f64> {
        let out = self.policy.forward(s);
        let (mean, log_std) = split_head(&out);
        let noise: Vec<f64> = (0..self.d_a).map(|_| rng.sample(StandardNormal)).collect();
        gaussian_head_sample(mean, log_std, &noise).action
    }

    /// Deterministic (mean) action, for evaluation rollouts.
    pub fn act_mean(&self, s: &[f64]) -> Vec<f64> {
        let out = self.policy.forward(s);
        let (mean, _) = split_head(&out);
        mean.iter().map(|m| m.tanh()).collect()
    }

    fn polyak(&mut self, tau: f64) {
        for (t, s) in [(&mut self.q1_target, &self.q1), (&mut self.q2_target, &self.q2)] {
            for (lt, ls) in t.layers_mut().iter_mut().zip(s.layers()) {
                for (a, b) in lt.w.data_mut().iter_mut().zip(ls.w.data()) {
                    *a = tau * b + (1.0 - tau) * *a;
                }
                for (a, b) in lt.b.iter_mut().zip(&ls.b) {
                    *a = tau * b + (1.0 - tau) * *a;
                }
            }
        }
    }
}

#[inline]
fn q_input(s: &[f64], a: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(s.len() + a.len());
    v.extend_from_slice(s);
    v.extend_from_slice(a);
    v
}

/// Per-batch result of the target computation.
pub struct TargetBatch {
    pub y: Vec<f64>,
    /// Mean per-sample empowerment estimate carried in the bonus (0 when the
    /// bonus is inactive).
    pub empowerment_mean: f64,
}

/// Bellman targets `y = r + gamma (1 - done) (min Q_target(s', a') + bonus)`
/// with fresh policy samples `a'`. The bonus is `alpha * empowerment` in
/// `Cip` mode and `alpha * (-sum log pi)` in baseline mode; `alpha = 0`
/// skips the bonus arithmetic entirely.
pub fn critic_target<R: Rng>(
    agent: &AgentState,
    batch: &[&Transition],
    config: &AgentConfig,
    rng: &mut R,
) -> TargetBatch {
    let alpha = config.alpha;
    let mut y = Vec::with_capacity(batch.len());
    let mut emp_acc = 0.0;
    for t in batch {
        let head_out = agent.policy.forward(&t.s_next);
        let (mean, log_std) = split_head(&head_out);
        let noise: Vec<f64> = (0..agent.d_a).map(|_| rng.sample(StandardNormal)).collect();
        let sample = gaussian_head_sample(mean, log_std, &noise);
        let qin = q_input(&t.s_next, &sample.action);
        let q_min = agent
            .q1_target
            .forward(&qin)[0]
            .min(agent.q2_target.forward(&qin)[0]);
        let bonus = if alpha == 0.0 {
            0.0
        } else {
            if agent.mode.weighted_empowerment() {
                // Fresh-sample weighted policy entropy at s' minus the
                // realized-transition inverse entropy.
                let omega = &agent.snapshot.weights.omega;
                let h_policy: f64 = sample
                    .per_dim_log_prob
                    .iter()
                    .zip(omega)
                    .map(|(lp, w)| -w * lp)
                    .sum();
                let log_inv = agent.inverse.log_prob_dims(&t.s, &t.s_next, &t.a);
                let h_inverse: f64 = log_inv.iter().zip(omega).map(|(lp, w)| -w * lp).sum();
                let e = h_policy - h_inverse;
                emp_acc += e;
                alpha * e
            } else {
                let ent: f64 = sample.per_dim_log_prob.iter().map(|lp| -lp).sum();
                emp_acc += ent;
                alpha * ent
            }
        };
        y.push(t.r + config.gamma * (1.0 - f64::from(t.done)) * (q_min + bonus));
    }
    TargetBatch {
        y,
        empowerment_mean: if alpha == 0.0 {
            0.0
        } else {
            emp_acc / batch.len() as f64
        },
    }
}

/// One Adam step on each critic's mean squared TD error against `targets`.
/// Returns the mean TD loss over both critics. Non-finite gradients reject
/// the update for that critic and bump the diagnostics counter.
pub fn update_critics(
    agent: &mut AgentState,
    batch: &[&Transition],
    targets: &[f64],
    config: &AgentConfig,
    diag: &mut Diagnostics,
) -> f64 {
    assert_eq!(batch.len(), targets.len());
    let b = batch.len() as f64;
    let mut total_loss = 0.0;
    for critic_idx in 0..2 {
        let (net, adam) = if critic_idx == 0 {
            (&mut agent.q1, &mut agent.adam_q1)
        } else {
            (&mut agent.q2, &mut agent.adam_q2)
        };
        let mut grads = MlpGradients::zeros_like(net);
        let mut loss = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let qin = q_input(&t.s, &t.a);
            let trace = net.forward_trace(&qin);
            let q = trace.output()[0];
            let diff = q - y;
            loss += diff * diff / b;
            grads.add_assign(&net.backward(&trace, &[2.0 * diff / b]));
        }
        if adam.step(net, &grads, config.lr).is_err() {
            diag.rejected_updates += 1;
        }
        total_loss += loss;
    }
    total_loss / 2.0
}

/// Per-batch result of the policy update.
pub struct PolicyUpdate {
    pub loss: f64,
}

/// One ascent step on `E[min Q(s, a~) + alpha * empowerment(s, a~)]` with
/// reparameterized samples. The weighted policy log-density is differentiable
/// through the sample; the inverse-model term contributes value only
/// (gradient-stopped). With `alpha = 0` the bonus branch is excised and this
/// is the plain deterministic-critic ascent.
pub fn update_policy<R: Rng>(
    agent: &mut AgentState,
    batch: &[&Transition],
    config: &AgentConfig,
    rng: &mut R,
    diag: &mut Diagnostics,
) -> PolicyUpdate {
    let noises: Vec<Vec<f64>> = batch
        .iter()
        .map(|_| (0..agent.d_a).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let (loss, grads) = policy_step(agent, batch, config, &noises);
    if agent
        .adam_policy
        .step(&mut agent.policy, &grads, config.lr)
        .is_err()
    {
        diag.rejected_updates += 1;
    }
    PolicyUpdate { loss }
}

/// Gradient and loss of the policy objective for fixed reparameterization
/// noise. Split out so finite-difference tests can drive it directly.
fn policy_step(
    agent: &AgentState,
    batch: &[&Transition],
    config: &AgentConfig,
    noises: &[Vec<f64>],
) -> (f64, MlpGradients) {
    let alpha = config.alpha;
    let b = batch.len() as f64;
    let d_a = agent.d_a;
    let mut grads = MlpGradients::zeros_like(&agent.policy);
    let mut loss = 0.0;
    for (t, noise) in batch.iter().zip(noises) {
        let trace = agent.policy.forward_trace(&t.s);
        let head = trace.output();
        let (mean, log_std_raw) = split_head(head);

        let mut action = Vec::with_capacity(d_a);
        let mut sigmas = Vec::with_capacity(d_a);
        let mut clamped = Vec::with_capacity(d_a);
        for i in 0..d_a {
            let ls = clamp_log_std(log_std_raw[i]);
            clamped.push(ls != log_std_raw[i]);
            let sigma = ls.exp();
            sigmas.push(sigma);
            action.push((mean[i] + sigma * noise[i]).tanh());
        }

        // Q path through the smaller critic only.
        let qin = q_input(&t.s, &action);
        let trace_q1 = agent.q1.forward_trace(&qin);
        let trace_q2 = agent.q2.forward_trace(&qin);
        let q1v = trace_q1.output()[0];
        let q2v = trace_q2.output()[0];
        let (q_min, q_grads) = if q1v <= q2v {
            (q1v, agent.q1.backward(&trace_q1, &[-1.0 / b]))
        } else {
            (q2v, agent.q2.backward(&trace_q2, &[-1.0 / b]))
        };
        let dq_da = &q_grads.d_input[t.s.len()..];

        let mut upstream = vec![0.0; 2 * d_a];
        let mut sample_loss = -q_min;
        for i in 0..d_a {
            let a = action[i];
            let one_m_a2 = 1.0 - a * a;
            // dLoss/d raw from the Q path.
            let mut d_raw = dq_da[i] * one_m_a2;
            if alpha > 0.0 {
                let w = if agent.mode.weighted_empowerment() {
                    agent.snapshot.weights.omega[i]
                } else {
                    1.0
                };
                let ls = clamp_log_std(log_std_raw[i]);
                let log_pi = -0.5 * noise[i] * noise[i]
                    - ls
                    - 0.918_938_533_204_672_7
                    - (one_m_a2 + EPS_SQUASH).ln();
                sample_loss += alpha * w * log_pi;
                // d log_pi / d raw comes only from the squash correction.
                d_raw += alpha * w / b * (2.0 * a * one_m_a2 / (one_m_a2 + EPS_SQUASH));
                // Direct log_std slot term (gated by the clamp below).
                if !clamped[i] {
                    upstream[d_a + i] += alpha * w * (-1.0) / b;
                }
            }
            upstream[i] += d_raw;
            if !clamped[i] {
                upstream[d_a + i] += d_raw * sigmas[i] * noise[i];
            }
        }
        // The Cip empowerment bonus also carries the gradient-stopped inverse
        // log-likelihood; it shifts the reported loss but not the gradient.
        if alpha > 0.0 && agent.mode.weighted_empowerment() {
            let log_inv = agent.inverse.log_prob_dims(&t.s, &t.s_next, &action);
            let stopped: f64 = log_inv
                .iter()
                .zip(&agent.snapshot.weights.omega)
                .map(|(lp, w)| w * lp)
                .sum();
            sample_loss -= alpha * stopped;
        }
        loss += sample_loss / b;
        grads.add_assign(&agent.policy.backward(&trace, &upstream));
    }
    (loss, grads)
}

/// Everything a finished run returns.
#[derive(Debug)]
pub struct TrainOutcome {
    pub rows: Vec<EpisodeRow>,
    pub snapshots: Vec<SnapshotHash>,
    pub agent: AgentState,
    pub diagnostics: Diagnostics,
}

/// Full training pipeline in `Cip` mode.
pub fn train(config: &AgentConfig, env: &EnvSpec) -> Result<TrainOutcome> {
    run(config, env, AgentMode::Cip)
}

/// Identical loop with uniform weights, no augmentation, and the standard
/// entropy bonus. Exists for controlled comparisons.
pub fn train_baseline_sac(config: &AgentConfig, env: &EnvSpec) -> Result<TrainOutcome> {
    run(config, env, AgentMode::BaselineSac)
}

fn train_err(step: usize, stage: &str, source: CoreError) -> CoreError {
    CoreError::Train {
        step,
        stage: stage.to_string(),
        source: Box::new(source),
    }
}

pub fn run(config: &AgentConfig, env_spec: &EnvSpec, mode: AgentMode) -> Result<TrainOutcome> {
    config.validate()?;
    env_spec.validate()?;
    let started = std::time::Instant::now();

    let mut env = Env::new(env_spec.clone(), config.seed);
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut agent = AgentState::new(config, env_spec.d_s, env_spec.d_a, mode, &mut rng);
    let mut replay = ReplayBuffer::new(config.replay_capacity);
    let mut causal_buf = ReplayBuffer::new(config.causal_buffer_capacity);
    let mut diag = Diagnostics::default();

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut s = env.state().to_vec();
    let mut episode = 0usize;
    let mut ep_return = 0.0;
    let mut ep_losses = EpisodeAverages::default();
    let mut refit_counter = 0u64;
    // Real transitions pushed vs already offered as swap sources; each real
    // transition is a source candidate at most once across refits.
    let mut real_pushed = 0u64;
    let mut augmented_through = 0u64;

    for step in 0..config.total_steps {
        let a = if step < config.warmup_steps {
            (0..env_spec.d_a).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()
        } else {
            agent.act(&s, &mut rng)
        };
        let out = env.step(&a);
        let t = Transition {
            s: s.clone(),
            a,
            r: out.reward,
            s_next: out.next_state.clone(),
            done: out.done,
            synthetic: false,
        };
        ep_return += out.reward;
        replay.push(t.clone());
        causal_buf.push(t);
        real_pushed += 1;

        if out.done {
            let ep_success = out.dist <= env_spec.success_radius;
            rows.push(EpisodeRow {
                step: step + 1,
                episode,
                ret: ep_return,
                success: ep_success,
                critic_loss: ep_losses.mean_critic(),
                policy_loss: ep_losses.mean_policy(),
                inverse_nll: ep_losses.mean_inverse(),
                empowerment_mean: ep_losses.mean_empowerment(),
                synthetic_fraction: causal_buf.synthetic_fraction(),
                wallclock_s: started.elapsed().as_secs_f64(),
            });
            episode += 1;
            ep_return = 0.0;
            ep_losses = EpisodeAverages::default();
            s = env.reset_continue();
        } else {
            s = out.next_state;
        }

        // Steps 1 and 2: refit causal structure and augment, on cadence.
        if mode.augments()
            && config.causal_update_interval > 0
            && causal_buf.len() >= config.causal_sample_size
            && (step + 1) % config.causal_update_interval == 0
        {
            refit_counter += 1;
            let window = causal_buf.recent(config.causal_sample_size);
            let cfg = DiscoveryConfig {
                min_samples: config.causal_sample_size.min(window.len()),
            };
            let m_state = fit_state_reward_mask(&window, &cfg)
                .map_err(|e| train_err(step + 1, "fit_state_reward_mask", e))?;
            let u_set = uncontrollable_set(&m_state, config.theta);
            let aug_seed = config
                .seed
                .wrapping_add(refit_counter.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let fresh_real = (real_pushed - augmented_through) as usize;
            let (synthetic, _stats) = crate::augment::augment_batch_tail(
                &window,
                &m_state,
                config.theta,
                config.augment_rate,
                fresh_real,
                aug_seed,
            );
            augmented_through = real_pushed;
            for st in synthetic {
                replay.push(st.clone());
                causal_buf.push(st);
            }
            let window2 = causal_buf.recent(config.causal_sample_size);
            let (m_actions, weights) = crate::causal::fit_action_reward_weights(
                &window2,
                &DiscoveryConfig {
                    min_samples: config.causal_sample_size.min(window2.len()),
                },
            )
            .map_err(|e| train_err(step + 1, "fit_action_reward_weights", e))?;
            let snapshot = CausalSnapshot {
                matrices: m_actions,
                weights,
                u_set,
            };
            snapshots.push(SnapshotHash {
                step: step + 1,
                hash: format!("{:016x}", snapshot.content_hash()),
            });
            agent.snapshot = snapshot;
        }

        // Step 3: gradient phase.
        if step + 1 > config.warmup_steps && replay.len() >= config.batch_size {
            let batch = replay.sample(config.batch_size, &mut rng);
            if mode.weighted_empowerment() {
                let owned: Vec<Transition> = batch.iter().map(|t| (*t).clone()).collect();
                match fit_inverse_dynamics(&mut agent.inverse, &owned, config.lr) {
                    Ok(Some(nll)) => ep_losses.push_inverse(nll),
                    Ok(None) => {}
                    Err(_) => diag.rejected_updates += 1,
                }
            }
            let targets = critic_target(&agent, &batch, config, &mut rng);
            if targets.y.iter().any(|v| !v.is_finite()) {
                diag.rejected_updates += 1;
            } else {
                let critic_loss = update_critics(&mut agent, &batch, &targets.y, config, &mut diag);
                let pol = update_policy(&mut agent, &batch, config, &mut rng, &mut diag);
                ep_losses.push(critic_loss, pol.loss, targets.empowerment_mean);
                agent.grad_steps += 1;
                if agent.grad_steps % config.target_update_interval as u64 == 0 {
                    agent.polyak(config.tau);
                }
            }
        }
    }
    diag.action_clamp_events = env.clamp_events();
    Ok(TrainOutcome {
        rows,
        snapshots,
        agent,
        diagnostics: diag,
    })
}

#[derive(Default)]
struct EpisodeAverages {
    critic: f64,
    policy: f64,
    empowerment: f64,
    n: usize,
    inverse: f64,
    n_inverse: usize,
}

impl EpisodeAverages {
    fn push(&mut self, critic: f64, policy: f64, empowerment: f64) {
        self.critic += critic;
        self.policy += policy;
        self.empowerment += empowerment;
        self.n += 1;
    }

    fn push_inverse(&mut self, nll: f64) {
        self.inverse += nll;
        self.n_inverse += 1;
    }

    fn mean_critic(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.critic / self.n as f64
        }
    }

    fn mean_policy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.policy / self.n as f64
        }
    }

    fn mean_empowerment(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.empowerment / self.n as f64
        }
    }

    fn mean_inverse(&self) -> f64 {
        if self.n_inverse == 0 {
            0.0
        } else {
            self.inverse / self.n_inverse as f64
        }
    }
}

/// Clamp bounds re-exported for tests that pin head behavior.
pub const POLICY_LOG_STD_BOUNDS: (f64, f64) = (LOG_STD_MIN, LOG_STD_MAX);
