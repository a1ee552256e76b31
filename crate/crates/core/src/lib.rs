//! Causal structure discovery and causally-informed reinforcement learning on
//! synthetic factored MDPs.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`numkit`]: dense matrix/vector kernels, a fixed-architecture MLP with
//!   reverse-mode gradients, a squashed diagonal-Gaussian action head, Adam,
//!   and a binary parameter checkpoint format.
//! - [`envs`]: seedable point-mass environments with ground-truth causal masks
//!   over state and action dimensions, plus a linear-SEM data generator for
//!   discovery oracle tests.
//! - [`causal`]: DirectLiNGAM causal ordering and coefficient estimation, and
//!   the reward-row extraction that yields state/action influence vectors, the
//!   uncontrollable state set, and normalized action weights.
//! - [`augment`]: counterfactual replay augmentation by swapping uncontrollable
//!   state dimensions between transitions that share them.
//! - [`empower`]: an inverse dynamics model and the causally weighted
//!   empowerment estimate (weighted policy entropy minus weighted inverse
//!   dynamics entropy).
//! - [`agent`]: a soft actor-critic trainer whose Bellman target and policy
//!   objective carry the empowerment bonus, plus a plain SAC baseline.
//! - [`eval`]: normalized-score and optimality-gap summaries against bundled
//!   random and scripted-controller reference rollouts.
//!
//! All numerics are 64-bit floats and every stochastic component is seeded, so
//! identical inputs produce bit-identical outputs.

pub mod agent;
pub mod augment;
pub mod causal;
pub mod empower;
pub mod envs;
pub mod error;
pub mod eval;
pub mod numkit;

pub use error::{CoreError, Result};
