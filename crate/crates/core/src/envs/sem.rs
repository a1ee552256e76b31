//! Linear structural-equation-model data generator.
//!
//! Each variable is a linear function of its parents plus independent noise:
//! `x_j = sum_k B[j,k] x_k + e_j`, sampled ancestrally in topological order.
//! Noise is non-Gaussian (uniform or Laplace) by default so the coefficient
//! matrix stays identifiable from observational data; a Gaussian tag exists
//! solely for diagnostics that record what happens when identifiability
//! assumptions are broken.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::numkit::Matrix;

use super::Transition;

/// Per-variable noise distribution, zero-mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDist {
    /// Uniform on `[-scale, scale]`; variance `scale^2 / 3`.
    Uniform { scale: f64 },
    /// Laplace with scale `b`; variance `2 b^2`.
    Laplace { scale: f64 },
    /// Gaussian with standard deviation `scale`. Breaks identifiability;
    /// diagnostics only.
    Gaussian { scale: f64 },
}

impl NoiseDist {
    pub fn variance(&self) -> f64 {
        match self {
            NoiseDist::Uniform { scale } => scale * scale / 3.0,
            NoiseDist::Laplace { scale } => 2.0 * scale * scale,
            NoiseDist::Gaussian { scale } => scale * scale,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseDist::Uniform { scale } => rng.gen_range(-scale..*scale),
            NoiseDist::Laplace { scale } => {
                let u: f64 = rng.gen_range(-0.5..0.5);
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseDist::Gaussian { scale } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                scale * z
            }
        }
    }
}

/// A validated linear SEM: coefficient matrix, per-variable noise, and which
/// variable plays the reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemSpec {
    pub p: usize,
    /// `b[j][k]` is the effect of `x_k` on `x_j`. Must be acyclic (strictly
    /// lower-triangular under some permutation).
    pub b: Matrix,
    pub noise: Vec<NoiseDist>,
    pub reward_index: usize,
}

impl SemSpec {
    /// Validates acyclicity (a topological order must exist) and noise
    /// scales. Cyclic coefficient matrices are rejected here, at
    /// construction.
    pub fn new(b: Matrix, noise: Vec<NoiseDist>, reward_index: usize) -> Result<Self> {
        let p = b.rows();
        if b.cols() != p {
            return Err(CoreError::invalid_config("b", "must be square"));
        }
        if noise.len() != p {
            return Err(CoreError::invalid_config("noise", "length != p"));
        }
        if reward_index >= p {
            return Err(CoreError::invalid_config("reward_index", "out of range"));
        }
        for (i, nd) in noise.iter().enumerate() {
            let v = nd.variance();
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::invalid_config(
                    "noise",
                    format!("variable {i} has non-positive or non-finite variance"),
                ));
            }
        }
        let spec = SemSpec {
            p,
            b,
            noise,
            reward_index,
        };
        spec.topo_order()?;
        Ok(spec)
    }

    /// Topological order of the induced DAG (parents before children).
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let p = self.p;
        let mut in_deg = vec![0usize; p];
        for j in 0..p {
            for k in 0..p {
                if j != k && self.b.get(j, k) != 0.0 {
                    in_deg[j] += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..p).filter(|&j| in_deg[j] == 0).collect();
        let mut order = Vec::with_capacity(p);
        let mut head = 0;
        while head < queue.len() {
            let k = queue[head];
            head += 1;
            order.push(k);
            for j in 0..p {
                if j != k && self.b.get(j, k) != 0.0 {
                    in_deg[j] -= 1;
                    if in_deg[j] == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        if order.len() != p {
            return Err(CoreError::CyclicSem);
        }
        Ok(order)
    }

    /// Binary support of the reward row (direct parents of the reward
    /// variable).
    pub fn reward_row_support(&self) -> Vec<bool> {
        (0..self.p)
            .map(|k| k != self.reward_index && self.b.get(self.reward_index, k) != 0.0)
            .collect()
    }

    /// Random DAG over a hidden permutation with every variable scaled to
    /// unit variance: coefficient magnitudes are drawn from `[0.5, 0.65]`
    /// (so raw and standardized coefficients coincide) and noise variances
    /// absorb the rest. `gaussian` switches the noise family from the
    /// uniform/Laplace mix to Gaussian for identifiability diagnostics.
    pub fn random_unit_variance(p: usize, max_parents: usize, seed: u64, gaussian: bool) -> Self {
        assert!(p >= 2);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        // Hidden causal order: a random permutation of the variables.
        let mut perm: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let mut b = Matrix::zeros(p, p);
        let mut noise_var = vec![1.0; p];
        for k in 1..p {
            let child = perm[k];
            let n_par = rng.gen_range(0..=max_parents.min(k));
            // Distinct parents among the k predecessors.
            let mut pool: Vec<usize> = (0..k).map(|i| perm[i]).collect();
            let mut sum_sq = 0.0;
            for _ in 0..n_par {
                let pick = rng.gen_range(0..pool.len());
                let parent = pool.swap_remove(pick);
                let mag = rng.gen_range(0.5..0.65);
                let coeff = if rng.gen_bool(0.5) { mag } else { -mag };
                b.set(child, parent, coeff);
                sum_sq += coeff * coeff;
            }
            noise_var[child] = (1.0 - sum_sq).max(0.1);
        }
        let noise: Vec<NoiseDist> = noise_var
            .iter()
            .map(|&v| {
                if gaussian {
                    NoiseDist::Gaussian { scale: v.sqrt() }
                } else if rng.gen_bool(0.5) {
                    NoiseDist::Uniform {
                        scale: (3.0 * v).sqrt(),
                    }
                } else {
                    NoiseDist::Laplace {
                        scale: (v / 2.0).sqrt(),
                    }
                }
            })
            .collect();
        SemSpec::new(b, noise, p - 1).expect("construction is acyclic")
    }
}

/// Samples `n` rows ancestrally: `x_j = sum_k B[j,k] x_k + e_j` with
/// independent noise. Returns an `n x p` matrix.
pub fn sem_generate(spec: &SemSpec, n: usize, seed: u64) -> Matrix {
    assert!(n >= 1, "need at least one sample");
    let order = spec.topo_order().expect("SemSpec validated at construction");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = Matrix::zeros(n, spec.p);
    let mut x = vec![0.0; spec.p];
    for r in 0..n {
        for &j in &order {
            let mut v = spec.noise[j].sample(&mut rng);
            for k in 0..spec.p {
                let c = spec.b.get(j, k);
                if c != 0.0 {
                    v += c * x[k];
                }
            }
            x[j] = v;
        }
        data.row_mut(r).copy_from_slice(&x);
    }
    data
}

/// Interprets SEM columns as `[s_1..s_dS, a_1..a_dA, r]` and materializes
/// transitions for discovery tests. Action columns must stay inside
/// `[-1, 1]`, so give them bounded (uniform, scale <= 1) noise and no
/// parents. `s_next` repeats `s`; only the `(s, a, r)` block carries causal
/// content here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemMdpView {
    pub spec: SemSpec,
    pub d_s: usize,
    pub d_a: usize,
}

impl SemMdpView {
    pub fn new(spec: SemSpec, d_s: usize, d_a: usize) -> Result<Self> {
        if d_s + d_a + 1 != spec.p {
            return Err(CoreError::invalid_config(
                "d_s/d_a",
                "d_s + d_a + 1 must equal p",
            ));
        }
        if spec.reward_index != spec.p - 1 {
            return Err(CoreError::invalid_config(
                "reward_index",
                "MDP view requires the reward to be the last column",
            ));
        }
        Ok(SemMdpView { spec, d_s, d_a })
    }

    pub fn transitions(&self, n: usize, seed: u64) -> Vec<Transition> {
        let data = sem_generate(&self.spec, n, seed);
        (0..n)
            .map(|r| {
                let row = data.row(r);
                let a: Vec<f64> = row[self.d_s..self.d_s + self.d_a].to_vec();
                assert!(
                    a.iter().all(|v| v.abs() <= 1.0),
                    "SEM action columns escaped [-1, 1]; use bounded noise"
                );
                Transition {
                    s: row[..self.d_s].to_vec(),
                    a,
                    r: row[self.d_s + self.d_a],
                    s_next: row[..self.d_s].to_vec(),
                    done: false,
                    synthetic: false,
                }
            })
            .collect()
    }

    /// Ground-truth supports of the reward row, split into state and action
    /// blocks.
    pub fn reward_masks(&self) -> (Vec<bool>, Vec<bool>) {
        let support = self.spec.reward_row_support();
        (
            support[..self.d_s].to_vec(),
            support[self.d_s..self.d_s + self.d_a].to_vec(),
        )
    }
}
