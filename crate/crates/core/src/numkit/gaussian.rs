//! Diagonal-Gaussian action head with tanh squashing.
//!
//! Every dimension is an independent Gaussian reparameterized as
//! `raw = mean + exp(log_std) * noise`, squashed to `action = tanh(raw)`.
//! Per-dimension log densities carry the change-of-variables correction
//! `-ln(1 - action^2 + EPS_SQUASH)`.

use serde::{Deserialize, Serialize};

/// Lower clamp for head log-standard-deviations.
pub const LOG_STD_MIN: f64 = -5.0;
/// Upper clamp for head log-standard-deviations.
pub const LOG_STD_MAX: f64 = 2.0;
/// Additive guard inside `ln(1 - a^2)` at tanh saturation.
pub const EPS_SQUASH: f64 = 1e-6;
/// Squashed actions are pulled inside (-1, 1) by this margin before `atanh`.
pub const ATANH_CLAMP: f64 = 1.0 - 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// One sample from the squashed head, with everything later passes need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianHeadOutput {
    pub mean: Vec<f64>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
    pub raw_sample: Vec<f64>,
    /// `tanh(raw_sample)`, element-wise in (-1, 1).
    pub action: Vec<f64>,
    /// Gaussian log density of `raw_sample` minus the squash correction,
    /// per dimension.
    pub per_dim_log_prob: Vec<f64>,
}

/// Splits a head output vector laid out as `[mean | log_std]` in halves.
pub fn split_head(head: &[f64]) -> (&[f64], &[f64]) {
    assert!(head.len() % 2 == 0, "head layout must be [mean | log_std]");
    head.split_at(head.len() / 2)
}

#[inline]
pub fn clamp_log_std(log_std: f64) -> f64 {
    log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// `atanh` with the argument pulled inside (-1, 1) so saturated actions stay
/// finite.
#[inline]
pub fn atanh_clamped(a: f64) -> f64 {
    a.clamp(-ATANH_CLAMP, ATANH_CLAMP).atanh()
}

/// Per-dimension log density of `x` under `N(mean, exp(log_std)^2)`, without
/// any squash correction. `log_std` is clamped.
#[inline]
pub fn gaussian_log_prob_dim(mean: f64, log_std: f64, x: f64) -> f64 {
    let ls = clamp_log_std(log_std);
    let z = (x - mean) * (-ls).exp();
    -0.5 * z * z - ls - HALF_LN_2PI
}

/// Per-dimension log density of the squashed action `a = tanh(raw)` where
/// `raw = atanh(a)`: Gaussian density of `raw` minus `ln(1 - a^2 + eps)`.
#[inline]
pub fn squashed_log_prob_dim(mean: f64, log_std: f64, action: f64) -> f64 {
    let raw = atanh_clamped(action);
    gaussian_log_prob_dim(mean, log_std, raw) - (1.0 - action * action + EPS_SQUASH).ln()
}

/// Draws one reparameterized sample per dimension from caller-supplied
/// standard-normal noise. `log_std` is clamped before use.
pub fn gaussian_head_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> GaussianHeadOutput {
    assert_eq!(mean.len(), log_std.len(), "head length mismatch");
    assert_eq!(mean.len(), noise.len(), "noise length mismatch");
    let d = mean.len();
    let mut out = GaussianHeadOutput {
        mean: mean.to_vec(),
        log_std: Vec::with_capacity(d),
        raw_sample: Vec::with_capacity(d),
        action: Vec::with_capacity(d),
        per_dim_log_prob: Vec::with_capacity(d),
    };
    for i in 0..d {
        let ls = clamp_log_std(log_std[i]);
        let raw = noise[i].mul_add(ls.exp(), mean[i]);
        let a = raw.tanh();
        // z = noise by construction; recompute from raw to keep the density
        // evaluated exactly at the sample.
        let lp = -0.5 * noise[i] * noise[i] - ls - HALF_LN_2PI - (1.0 - a * a + EPS_SQUASH).ln();
        out.log_std.push(ls);
        out.raw_sample.push(raw);
        out.action.push(a);
        out.per_dim_log_prob.push(lp);
    }
    out
}
