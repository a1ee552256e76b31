//! Reward-guided causal structure over transition data.
//!
//! Fits DirectLiNGAM on the columns `[s_1..s_dS, a_1..a_dA, r]` of a
//! transition batch and extracts the reward row: the direct influence of each
//! state and action dimension on the reward. From those coefficients come
//!
//! - the uncontrollable state set (dimensions whose standardized reward
//!   coefficient magnitude falls below a threshold `theta`), and
//! - normalized action weights `omega` used by the empowerment estimator.
//!
//! Thresholds operate on standardized coefficients so one `theta` is
//! comparable across dimensions of different scales; the de-standardized
//! coefficients are kept alongside for comparison against generating models.

pub mod lingam;

use serde::{Deserialize, Serialize};

use crate::envs::Transition;
use crate::error::{CoreError, Result};
use crate::numkit::Matrix;

pub use lingam::{
    direct_lingam, direct_lingam_full, direct_lingam_with_sinks, IndependenceScore, LingamFit,
    MaxEntScore,
};

/// Default threshold on standardized reward-row coefficients.
pub const DEFAULT_THETA: f64 = 0.05;
/// Floor added to every action weight before normalization so no dimension's
/// entropy contribution vanishes entirely.
pub const OMEGA_FLOOR: f64 = 0.05;
/// Default number of transitions a discovery pass requires.
pub const DEFAULT_CAUSAL_SAMPLE_SIZE: usize = 10_000;

/// State->reward and action->reward influence vectors from one discovery fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalMatrices {
    /// De-standardized (raw-unit) coefficients, length `d_S`.
    pub m_s_to_r: Vec<f64>,
    /// De-standardized coefficients, length `d_A`.
    pub m_a_to_r: Vec<f64>,
    /// Standardized coefficients; the units `theta` thresholds operate on.
    pub m_s_to_r_std: Vec<f64>,
    pub m_a_to_r_std: Vec<f64>,
    /// Sample count the fit used.
    pub fitted_on: usize,
    pub method: String,
}

impl CausalMatrices {
    /// Matrices with identical raw and standardized rows; used for manual
    /// construction in tests and for the zero-knowledge initial snapshot.
    pub fn from_rows(m_s_to_r: Vec<f64>, m_a_to_r: Vec<f64>) -> Self {
        CausalMatrices {
            m_s_to_r_std: m_s_to_r.clone(),
            m_a_to_r_std: m_a_to_r.clone(),
            m_s_to_r,
            m_a_to_r,
            fitted_on: 0,
            method: "manual".to_string(),
        }
    }

    pub fn zeros(d_s: usize, d_a: usize) -> Self {
        Self::from_rows(vec![0.0; d_s], vec![0.0; d_a])
    }

    pub fn d_s(&self) -> usize {
        self.m_s_to_r.len()
    }

    pub fn d_a(&self) -> usize {
        self.m_a_to_r.len()
    }

    pub fn is_finite(&self) -> bool {
        self.m_s_to_r.iter().all(|v| v.is_finite())
            && self.m_a_to_r.iter().all(|v| v.is_finite())
            && self.m_s_to_r_std.iter().all(|v| v.is_finite())
            && self.m_a_to_r_std.iter().all(|v| v.is_finite())
    }
}

/// State dimensions with no detectable causal influence on reward at
/// threshold `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncontrollableSet {
    /// Sorted, deduplicated state-dimension indices.
    pub indices: Vec<usize>,
    pub theta: f64,
}

impl UncontrollableSet {
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Intersection with another set (shared uncontrollable dimensions).
    pub fn intersect(&self, other: &UncontrollableSet) -> Vec<usize> {
        self.indices
            .iter()
            .copied()
            .filter(|i| other.contains(*i))
            .collect()
    }
}

/// Nonnegative action weights, normalized to sum to `d_A` so a uniform causal
/// influence reproduces an unweighted entropy scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionWeights {
    pub omega: Vec<f64>,
    pub normalization: String,
}

impl ActionWeights {
    /// Uniform weights (`omega_i = 1`), the zero-knowledge default.
    pub fn uniform(d_a: usize) -> Self {
        ActionWeights {
            omega: vec![1.0; d_a],
            normalization: "sum-to-da".to_string(),
        }
    }

    pub fn d_a(&self) -> usize {
        self.omega.len()
    }
}

/// `indices = { i : |m_s_to_r_std[i]| < theta }` (strict inequality).
pub fn uncontrollable_set(m: &CausalMatrices, theta: f64) -> UncontrollableSet {
    assert!(theta >= 0.0, "theta must be nonnegative");
    let indices = m
        .m_s_to_r_std
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() < theta)
        .map(|(i, _)| i)
        .collect();
    UncontrollableSet { indices, theta }
}

/// `omega_i = (|m_a_to_r_std[i]| + OMEGA_FLOOR)`, rescaled to sum to `d_A`.
pub fn action_weights(m: &CausalMatrices) -> ActionWeights {
    let d_a = m.d_a();
    let mut omega: Vec<f64> = m
        .m_a_to_r_std
        .iter()
        .map(|c| c.abs() + OMEGA_FLOOR)
        .collect();
    let total: f64 = omega.iter().sum();
    let scale = d_a as f64 / total;
    for w in &mut omega {
        *w *= scale;
    }
    ActionWeights {
        omega,
        normalization: "sum-to-da".to_string(),
    }
}

/// Element-wise product `omega_i * a_i`. Used only inside entropy weighting,
/// never fed back to an environment.
pub fn reweight_actions(a: &[f64], w: &ActionWeights) -> Vec<f64> {
    assert_eq!(a.len(), w.omega.len(), "action/weight length mismatch");
    a.iter().zip(&w.omega).map(|(ai, wi)| wi * ai).collect()
}

/// Controls the minimum batch a discovery pass accepts.
#[derive(Debug, Clone, Copy)]
pub struct DiscoveryConfig {
    pub min_samples: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            min_samples: DEFAULT_CAUSAL_SAMPLE_SIZE,
        }
    }
}

impl DiscoveryConfig {
    /// No minimum beyond what the estimator itself needs.
    pub fn allow_small() -> Self {
        DiscoveryConfig { min_samples: 0 }
    }
}

/// Shared engine: one DirectLiNGAM pass over `[s, a, r]` columns with the
/// reward row extracted in both raw and standardized units.
fn fit_reward_rows(transitions: &[Transition], cfg: &DiscoveryConfig) -> Result<CausalMatrices> {
    if transitions.len() < cfg.min_samples {
        return Err(CoreError::NotEnoughSamples {
            needed: cfg.min_samples,
            got: transitions.len(),
        });
    }
    let first = transitions.first().ok_or(CoreError::NotEnoughSamples {
        needed: 1,
        got: 0,
    })?;
    let d_s = first.s.len();
    let d_a = first.a.len();
    let p = d_s + d_a + 1;
    let n = transitions.len();

    let mut labels: Vec<String> = Vec::with_capacity(p);
    labels.extend((1..=d_s).map(|i| format!("s{i}")));
    labels.extend((1..=d_a).map(|i| format!("a{i}")));
    labels.push("r".to_string());

    let mut data = Matrix::zeros(n, p);
    for (ri, t) in transitions.iter().enumerate() {
        assert_eq!(t.s.len(), d_s, "inconsistent d_S in batch");
        assert_eq!(t.a.len(), d_a, "inconsistent d_A in batch");
        let row = data.row_mut(ri);
        row[..d_s].copy_from_slice(&t.s);
        row[d_s..d_s + d_a].copy_from_slice(&t.a);
        row[p - 1] = t.r;
    }

    // The reward never causes same-step states or actions (no simultaneous
    // or backward edges), so it is constrained to be a sink.
    let fit = direct_lingam_with_sinks(&data, &labels, &MaxEntScore, &[p - 1])?;
    let r_idx = p - 1;
    let take = |b: &Matrix, range: std::ops::Range<usize>| -> Vec<f64> {
        range.map(|c| b.get(r_idx, c)).collect()
    };
    Ok(CausalMatrices {
        m_s_to_r: take(&fit.b_raw, 0..d_s),
        m_a_to_r: take(&fit.b_raw, d_s..d_s + d_a),
        m_s_to_r_std: take(&fit.b_std, 0..d_s),
        m_a_to_r_std: take(&fit.b_std, d_s..d_s + d_a),
        fitted_on: n,
        method: "direct-lingam".to_string(),
    })
}

/// Fits the state->reward influence vector. Action columns are included as
/// covariates so state coefficients are not confounded through actions.
pub fn fit_state_reward_mask(
    transitions: &[Transition],
    cfg: &DiscoveryConfig,
) -> Result<CausalMatrices> {
    fit_reward_rows(transitions, cfg)
}

/// Fits the action->reward influence vector, conditioned on the states by
/// joint-variable inclusion, and derives normalized action weights.
pub fn fit_action_reward_weights(
    transitions: &[Transition],
    cfg: &DiscoveryConfig,
) -> Result<(CausalMatrices, ActionWeights)> {
    let m = fit_reward_rows(transitions, cfg)?;
    let w = action_weights(&m);
    Ok((m, w))
}

/// JSON document written by the CLI `discover` subcommand. The first six
/// fields are the stable schema; the `*_std` rows and the uncontrollable set
/// are documented extensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatricesExport {
    pub method: String,
    pub fitted_on: usize,
    pub m_s_to_r: Vec<f64>,
    pub m_a_to_r: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: f64,
    pub m_s_to_r_std: Vec<f64>,
    pub m_a_to_r_std: Vec<f64>,
    pub uncontrollable: Vec<usize>,
}

impl MatricesExport {
    pub fn new(m: &CausalMatrices, w: &ActionWeights, theta: f64) -> Self {
        let u = uncontrollable_set(m, theta);
        MatricesExport {
            method: m.method.clone(),
            fitted_on: m.fitted_on,
            m_s_to_r: m.m_s_to_r.clone(),
            m_a_to_r: m.m_a_to_r.clone(),
            omega: w.omega.clone(),
            theta,
            m_s_to_r_std: m.m_s_to_r_std.clone(),
            m_a_to_r_std: m.m_a_to_r_std.clone(),
            uncontrollable: u.indices,
        }
    }

    pub fn to_matrices(&self) -> CausalMatrices {
        CausalMatrices {
            m_s_to_r: self.m_s_to_r.clone(),
            m_a_to_r: self.m_a_to_r.clone(),
            m_s_to_r_std: self.m_s_to_r_std.clone(),
            m_a_to_r_std: self.m_a_to_r_std.clone(),
            fitted_on: self.fitted_on,
            method: self.method.clone(),
        }
    }

    pub fn weights(&self) -> ActionWeights {
        ActionWeights {
            omega: self.omega.clone(),
            normalization: "sum-to-da".to_string(),
        }
    }
}
