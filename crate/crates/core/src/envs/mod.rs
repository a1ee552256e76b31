//! Synthetic factored-MDP environments with ground-truth causal masks.
//!
//! All environments are bounded point-mass "reacher" variants in a `[-1, 1]^2`
//! arena: the agent drives a point toward a per-episode goal, optionally in
//! the presence of distractor state dimensions that evolve as action-free
//! AR(1) noise and never touch the reward. The dead-actuator variant widens
//! the action vector with dimensions that have no dynamical effect at all.
//!
//! State layouts (first-order kinematics, the default):
//!
//! ```text
//! [pos_x, pos_y, goal_x, goal_y, distractor_1 .. distractor_k]
//! ```
//!
//! With `with_velocity` set, two velocity dimensions are inserted after the
//! position and the dynamics become second-order:
//!
//! ```text
//! [pos_x, pos_y, vel_x, vel_y, goal_x, goal_y, distractor_1 .. distractor_k]
//! pos' = pos + dt * vel
//! vel' = vel + dt * (force_scale * a - drag * vel)      (clipped to bounds)
//! ```
//!
//! The reward is the negative distance of the *post-step* position to the
//! goal, `r = -|pos' - goal|`, so reward depends directly on position, goal,
//! and (in the first-order case) the live action dimensions. Goals are drawn
//! from an asymmetric box (`goal_low..goal_high`, positive quadrant by
//! default) so those direct effects have nonzero linear coefficients and stay
//! visible to a linear causal discovery pass; velocity dimensions, when
//! present, carry no direct reward edge but are marked controllable (mask 1)
//! because swapping them would break the dynamics.

pub mod io;
pub mod sem;
pub mod toy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One `(s, a, r, s', done)` record; the atom of replay, augmentation, and
/// discovery. Synthetic (counterfactually generated) transitions carry a
/// provenance flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub synthetic: bool,
}

fn is_false(b: &bool) -> bool {
    !b
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.s.iter().all(|v| v.is_finite())
            && self.a.iter().all(|v| v.is_finite())
            && self.r.is_finite()
            && self.s_next.iter().all(|v| v.is_finite())
    }
}

/// Velocity bound for the second-order kinematics.
const V_MAX: f64 = 2.0;

/// Environment descriptor with the ground-truth causal masks used by oracle
/// tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub d_s: usize,
    pub d_a: usize,
    /// Integration step size.
    pub dt: f64,
    pub episode_horizon: usize,
    pub n_distractors: usize,
    /// AR(1) coefficient of the distractor process, in (0, 1).
    pub distractor_ar_coeff: f64,
    /// Half-width of the uniform AR(1) innovations (non-Gaussian on purpose).
    pub distractor_noise: f64,
    /// Velocity command scale: first-order kinematics move up to
    /// `dt * v_scale` per step and dimension.
    pub v_scale: f64,
    /// Leading action dimensions that drive the dynamics; the rest are dead.
    pub live_action_dims: usize,
    /// Second-order kinematics with velocity dimensions in the state.
    pub with_velocity: bool,
    /// Force scale for the second-order kinematics.
    pub force_scale: f64,
    /// Linear drag for the second-order kinematics.
    pub drag: f64,
    /// Threshold the dense reward into {-1, 0} at `success_radius`.
    pub sparse: bool,
    pub success_radius: f64,
    /// Potential-based shaping weight: the reward becomes
    /// `-dist' + progress_shaping * (dist - dist')`. Zero for the plain
    /// reacher; positive in the dead-actuator variant, where it strengthens
    /// the direct action->reward channel without moving the optimal policy.
    pub progress_shaping: f64,
    /// Per-dimension goal box (asymmetric by default; see module docs).
    pub goal_low: f64,
    pub goal_high: f64,
    pub ground_truth_s_mask: Vec<bool>,
    pub ground_truth_a_mask: Vec<bool>,
}

impl EnvSpec {
    /// Point-mass reacher with `k` distractor dimensions.
    pub fn distractor_reacher(k: usize) -> Self {
        let d_s = 4 + k;
        let mut s_mask = vec![true; 4];
        s_mask.extend(std::iter::repeat(false).take(k));
        EnvSpec {
            name: format!("distractor-reacher-{k}"),
            d_s,
            d_a: 2,
            dt: 0.05,
            episode_horizon: 200,
            n_distractors: k,
            distractor_ar_coeff: 0.9,
            distractor_noise: 0.4,
            v_scale: 4.0,
            live_action_dims: 2,
            with_velocity: false,
            force_scale: 10.0,
            drag: 2.0,
            sparse: false,
            success_radius: 0.15,
            progress_shaping: 0.0,
            goal_low: 0.2,
            goal_high: 0.9,
            ground_truth_s_mask: s_mask,
            ground_truth_a_mask: vec![true; 2],
        }
    }

    /// Reacher variant with velocity dimensions in the state and second-order
    /// kinematics. Velocity dims carry no direct reward edge but are marked
    /// controllable so they are never swapped.
    pub fn distractor_reacher_with_velocity(k: usize) -> Self {
        let mut spec = Self::distractor_reacher(k);
        spec.name = format!("distractor-reacher-vel-{k}");
        spec.with_velocity = true;
        spec.d_s = 6 + k;
        let mut s_mask = vec![true; 6];
        s_mask.extend(std::iter::repeat(false).take(k));
        spec.ground_truth_s_mask = s_mask;
        spec
    }

    /// Reacher with six action dimensions of which only the first two have
    /// any dynamical effect, plus `k` distractor state dimensions.
    pub fn dead_actuator(k: usize) -> Self {
        let mut spec = Self::distractor_reacher(k);
        spec.name = format!("dead-actuator-{k}");
        spec.d_a = 6;
        spec.live_action_dims = 2;
        spec.v_scale = 6.0;
        spec.progress_shaping = 1.0;
        let mut a_mask = vec![true, true];
        a_mask.extend(std::iter::repeat(false).take(4));
        spec.ground_truth_a_mask = a_mask;
        spec
    }

    /// Looks an environment up by its canonical name, e.g.
    /// `distractor-reacher-8` or `dead-actuator-4`.
    pub fn by_name(name: &str) -> Result<Self> {
        let parse_k = |prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix).and_then(|s| s.parse().ok())
        };
        if let Some(k) = parse_k("distractor-reacher-vel-") {
            return Ok(Self::distractor_reacher_with_velocity(k));
        }
        if let Some(k) = parse_k("distractor-reacher-") {
            return Ok(Self::distractor_reacher(k));
        }
        if let Some(k) = parse_k("dead-actuator-") {
            return Ok(Self::dead_actuator(k));
        }
        Err(CoreError::invalid_config(
            "env",
            format!(
                "unknown environment `{name}`; expected distractor-reacher-<k>, \
                 distractor-reacher-vel-<k>, or dead-actuator-<k>"
            ),
        ))
    }

    /// Number of non-distractor ("task") state dimensions.
    pub fn task_dims(&self) -> usize {
        self.d_s - self.n_distractors
    }

    /// Indices of the distractor state dimensions.
    pub fn distractor_indices(&self) -> Vec<usize> {
        (self.task_dims()..self.d_s).collect()
    }

    fn goal_offset(&self) -> usize {
        if self.with_velocity {
            4
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ground_truth_s_mask.len() != self.d_s {
            return Err(CoreError::invalid_config("ground_truth_s_mask", "length != d_s"));
        }
        if self.ground_truth_a_mask.len() != self.d_a {
            return Err(CoreError::invalid_config("ground_truth_a_mask", "length != d_a"));
        }
        if !self.ground_truth_s_mask.iter().any(|&m| m) {
            return Err(CoreError::invalid_config("ground_truth_s_mask", "all zero"));
        }
        if !self.ground_truth_a_mask.iter().any(|&m| m) {
            return Err(CoreError::invalid_config("ground_truth_a_mask", "all zero"));
        }
        if self.task_dims() + self.n_distractors != self.d_s {
            return Err(CoreError::invalid_config("n_distractors", "task dims + distractors != d_s"));
        }
        if !(0.0 < self.distractor_ar_coeff && self.distractor_ar_coeff < 1.0) {
            return Err(CoreError::invalid_config("distractor_ar_coeff", "must be in (0,1)"));
        }
        Ok(())
    }

    /// Ground-truth binary supports of the state->reward and action->reward
    /// influence vectors.
    pub fn ground_truth_masks(&self) -> (Vec<bool>, Vec<bool>) {
        (
            self.ground_truth_s_mask.clone(),
            self.ground_truth_a_mask.clone(),
        )
    }

    /// Stationary standard deviation of one distractor dimension.
    pub fn distractor_stationary_std(&self) -> f64 {
        let innov_var = self.distractor_noise * self.distractor_noise / 3.0;
        (innov_var / (1.0 - self.distractor_ar_coeff * self.distractor_ar_coeff)).sqrt()
    }

    /// Post-step position as a pure function of state and (clamped) action.
    pub fn next_position(&self, state: &[f64], action: &[f64]) -> [f64; 2] {
        let mut pos = [state[0], state[1]];
        if self.with_velocity {
            for i in 0..2 {
                pos[i] = (pos[i] + self.dt * state[2 + i]).clamp(-1.0, 1.0);
            }
        } else {
            for i in 0..2 {
                let drive = if i < self.live_action_dims {
                    action[i].clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                pos[i] = (pos[i] + self.dt * self.v_scale * drive).clamp(-1.0, 1.0);
            }
        }
        pos
    }

    /// Deterministic reward of taking `action` in `state`: negative distance
    /// of the post-step position to the goal (thresholded when `sparse`).
    /// This is the same code path `Env::step` uses, so re-evaluation is
    /// bit-exact.
    pub fn reward(&self, state: &[f64], action: &[f64]) -> f64 {
        assert_eq!(state.len(), self.d_s, "state length mismatch");
        assert_eq!(action.len(), self.d_a, "action length mismatch");
        let pos = self.next_position(state, action);
        let g = self.goal_offset();
        let dist = ((pos[0] - state[g]).powi(2) + (pos[1] - state[g + 1]).powi(2)).sqrt();
        self.reward_from_distances(self.distance_to_goal(state), dist)
    }

    fn reward_from_distances(&self, dist_before: f64, dist_after: f64) -> f64 {
        if self.sparse {
            if dist_after <= self.success_radius {
                0.0
            } else {
                -1.0
            }
        } else {
            -dist_after + self.progress_shaping * (dist_before - dist_after)
        }
    }

    /// Distance from the current position to the goal.
    pub fn distance_to_goal(&self, state: &[f64]) -> f64 {
        let g = self.goal_offset();
        ((state[0] - state[g]).powi(2) + (state[1] - state[g + 1]).powi(2)).sqrt()
    }
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOut {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// True exactly at `step == episode_horizon`.
    pub done: bool,
    /// Post-step distance to the goal, for success bookkeeping.
    pub dist: f64,
}

/// Single-owner environment state machine. Instances with independent seeds
/// may run in parallel; there is no shared mutable state.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    rng: ChaCha12Rng,
    state: Vec<f64>,
    step_in_episode: usize,
    clamp_events: u64,
}

impl Env {
    /// Creates the environment and resets it with `seed`.
    pub fn new(spec: EnvSpec, seed: u64) -> Self {
        spec.validate().expect("invalid EnvSpec");
        let mut env = Env {
            spec,
            rng: ChaCha12Rng::seed_from_u64(seed),
            state: Vec::new(),
            step_in_episode: 0,
            clamp_events: 0,
        };
        env.sample_initial_state();
        env
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Count of steps whose action needed clamping into `[-1, 1]`.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Reseeds the RNG and starts a fresh episode. Bit-identical for equal
    /// seeds.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
        self.sample_initial_state();
        self.state.clone()
    }

    /// Starts the next episode from the ongoing RNG stream (used inside
    /// training loops so one seed drives a whole run).
    pub fn reset_continue(&mut self) -> Vec<f64> {
        self.sample_initial_state();
        self.state.clone()
    }

    fn sample_initial_state(&mut self) {
        let spec = &self.spec;
        let mut s = Vec::with_capacity(spec.d_s);
        // pos
        s.push(self.rng.gen_range(-1.0..1.0));
        s.push(self.rng.gen_range(-1.0..1.0));
        if spec.with_velocity {
            s.push(0.0);
            s.push(0.0);
        }
        // goal
        s.push(self.rng.gen_range(spec.goal_low..spec.goal_high));
        s.push(self.rng.gen_range(spec.goal_low..spec.goal_high));
        // distractors from (approximately) their stationary distribution via
        // burn-in of the AR(1) recursion
        for _ in 0..spec.n_distractors {
            let mut d = 0.0;
            for _ in 0..50 {
                d = spec.distractor_ar_coeff * d
                    + self.rng.gen_range(-spec.distractor_noise..spec.distractor_noise);
            }
            s.push(d);
        }
        debug_assert_eq!(s.len(), spec.d_s);
        self.state = s;
        self.step_in_episode = 0;
    }

    /// Advances one step. Out-of-range actions are clamped and counted.
    pub fn step(&mut self, action: &[f64]) -> StepOut {
        assert_eq!(action.len(), self.spec.d_a, "action length mismatch");
        if action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            self.clamp_events += 1;
        }
        let clamped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();

        let spec = self.spec.clone();
        let mut next = self.state.clone();
        let pos = spec.next_position(&self.state, &clamped);
        next[0] = pos[0];
        next[1] = pos[1];
        if spec.with_velocity {
            for i in 0..2 {
                let drive = if i < spec.live_action_dims { clamped[i] } else { 0.0 };
                let vel = self.state[2 + i];
                next[2 + i] =
                    (vel + spec.dt * (spec.force_scale * drive - spec.drag * vel)).clamp(-V_MAX, V_MAX);
            }
        }
        let first_distractor = spec.task_dims();
        for i in 0..spec.n_distractors {
            let idx = first_distractor + i;
            next[idx] = spec.distractor_ar_coeff * self.state[idx]
                + self.rng.gen_range(-spec.distractor_noise..spec.distractor_noise);
        }

        let g = spec.goal_offset();
        let dist = ((pos[0] - next[g]).powi(2) + (pos[1] - next[g + 1]).powi(2)).sqrt();
        let reward = spec.reward_from_distances(spec.distance_to_goal(&self.state), dist);

        self.step_in_episode += 1;
        let done = self.step_in_episode == spec.episode_horizon;
        self.state = next.clone();
        StepOut {
            next_state: next,
            reward,
            done,
            dist,
        }
    }
}

/// Rolls out `n` transitions under a uniform-random policy, resetting at
/// episode boundaries. Used for discovery oracle tests and reference returns.
pub fn random_rollout(spec: &EnvSpec, n: usize, seed: u64) -> Vec<Transition> {
    let mut env = Env::new(spec.clone(), seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(n);
    let mut s = env.state().to_vec();
    for _ in 0..n {
        let a: Vec<f64> = (0..spec.d_a).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let step = env.step(&a);
        out.push(Transition {
            s: s.clone(),
            a,
            r: step.reward,
            s_next: step.next_state.clone(),
            done: step.done,
            synthetic: false,
        });
        s = if step.done { env.reset_continue() } else { step.next_state };
    }
    out
}
