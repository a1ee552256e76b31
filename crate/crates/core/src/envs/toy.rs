//! Tiny transition generators for inverse-dynamics and empowerment
//! calibration: one system where the action is exactly recoverable from the
//! state change, and one where it is independent of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::Transition;

/// Fully controllable, invertible dynamics: `s' = s + a` with
/// `a = tanh(raw)`, `raw ~ N(0, 1)`. The action is a deterministic function
/// of `(s, s')`, so a trained inverse dynamics model can become arbitrarily
/// sharp.
pub fn invertible_system(n: usize, d: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z.tanh()
                })
                .collect();
            let s_next: Vec<f64> = s.iter().zip(&a).map(|(si, ai)| si + ai).collect();
            let r = 0.0;
            Transition {
                s,
                a,
                r,
                s_next,
                done: false,
                synthetic: false,
            }
        })
        .collect()
}

/// Action-independent dynamics ("random teleport"): `s'` is a fresh draw that
/// ignores the action entirely, so the best inverse model is the action
/// marginal. Raw actions are standard normal, making that marginal's per-dim
/// entropy the Gaussian `0.5 ln(2 pi e) ~ 1.4189`.
pub fn teleport_system(n: usize, d: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z.tanh()
                })
                .collect();
            let s_next: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Transition {
                s,
                a,
                r: 0.0,
                s_next,
                done: false,
                synthetic: false,
            }
        })
        .collect()
}
