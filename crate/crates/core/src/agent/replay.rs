//! Ring replay storage with FIFO eviction and a uniform sampler.

use std::collections::VecDeque;

use rand::Rng;

use crate::envs::Transition;

/// Bounded transition store. Used both as the training replay `D` and the
/// local causal buffer `D_c`; synthetic entries are tracked so the synthetic
/// fraction is O(1) to read.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: VecDeque<Transition>,
    capacity: usize,
    synthetic: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            storage: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            synthetic: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn synthetic_fraction(&self) -> f64 {
        if self.storage.is_empty() {
            0.0
        } else {
            self.synthetic as f64 / self.storage.len() as f64
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            if let Some(old) = self.storage.pop_front() {
                if old.synthetic {
                    self.synthetic -= 1;
                }
            }
        }
        if t.synthetic {
            self.synthetic += 1;
        }
        self.storage.push_back(t);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    /// Uniform sample with replacement; reproducible given the caller's RNG.
    pub fn sample<'a, R: Rng>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        assert!(!self.is_empty(), "cannot sample an empty buffer");
        (0..batch)
            .map(|_| &self.storage[rng.gen_range(0..self.storage.len())])
            .collect()
    }

    /// Clones of the most recent `n` entries (all of them if fewer).
    pub fn recent(&self, n: usize) -> Vec<Transition> {
        let start = self.storage.len().saturating_sub(n);
        self.storage.iter().skip(start).cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn t(v: f64, synthetic: bool) -> Transition {
        Transition {
            s: vec![v],
            a: vec![0.0],
            r: v,
            s_next: vec![v],
            done: false,
            synthetic,
        }
    }

    #[test]
    fn fifo_eviction_and_synthetic_count() {
        let mut b = ReplayBuffer::new(3);
        b.push(t(1.0, true));
        b.push(t(2.0, false));
        b.push(t(3.0, false));
        assert!((b.synthetic_fraction() - 1.0 / 3.0).abs() < 1e-12);
        b.push(t(4.0, false)); // evicts the synthetic head
        assert_eq!(b.len(), 3);
        assert_eq!(b.synthetic_fraction(), 0.0);
        assert_eq!(b.get(0).r, 2.0);
    }

    #[test]
    fn sampling_is_reproducible_for_fixed_seed() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(t(i as f64, false));
        }
        let a: Vec<f64> = b
            .sample(16, &mut ChaCha12Rng::seed_from_u64(9))
            .iter()
            .map(|x| x.r)
            .collect();
        let c: Vec<f64> = b
            .sample(16, &mut ChaCha12Rng::seed_from_u64(9))
            .iter()
            .map(|x| x.r)
            .collect();
        assert_eq!(a, c);
    }

    #[test]
    fn recent_returns_the_tail() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..7 {
            b.push(t(i as f64, false));
        }
        let tail = b.recent(3);
        assert_eq!(tail.iter().map(|x| x.r).collect::<Vec<_>>(), vec![4.0, 5.0, 6.0]);
        assert_eq!(b.recent(99).len(), 7);
    }
}
