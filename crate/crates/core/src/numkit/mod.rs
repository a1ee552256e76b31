//! Dense numeric kernels: matrices, a tanh MLP with reverse-mode gradients,
//! a squashed diagonal-Gaussian head, the Adam optimizer, and a binary
//! parameter checkpoint format.
//!
//! Everything here is a pure function of its inputs (no hidden RNG state), so
//! identical seeds and inputs produce bit-identical results.

mod adam;
mod checkpoint;
pub mod fd;
mod gaussian;
mod matrix;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{load_networks, save_networks, CHECKPOINT_MAGIC};
pub use gaussian::{
    atanh_clamped, gaussian_head_sample, gaussian_log_prob_dim, split_head, squashed_log_prob_dim,
    GaussianHeadOutput, EPS_SQUASH, LOG_STD_MAX, LOG_STD_MIN,
};
pub use gaussian::clamp_log_std;
pub use matrix::Matrix;
pub use mlp::{Dense, DenseGrad, ForwardTrace, MlpGradients, MlpParams};
