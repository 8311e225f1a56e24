//! Random sources for the searchers.
//!
//! Draws go through [`RandomSource`] so tests can script exact sequences.
//! [`SeededRng`] is ChaCha8 seeded from a `u64`; every draw is derived from
//! `next_u64` with fixed-width arithmetic, so a seed yields the same
//! sequence on every platform.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub trait RandomSource {
    /// Uniform draw from `[0, 1)`.
    fn uniform(&mut self) -> f64;

    /// Uniform index in `0..n`. `n == 1` returns 0 without consuming a draw.
    fn index(&mut self, n: usize) -> usize;
}

impl<R: RandomSource + ?Sized> RandomSource for &mut R {
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }

    fn index(&mut self, n: usize) -> usize {
        (**self).index(n)
    }
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this seed, e.g. for evaluator noise.
    pub fn fork(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RandomSource for SeededRng {
    fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over empty range");
        if n == 1 {
            return 0;
        }
        self.inner.gen_range(0..n as u64) as usize
    }
}

/// Replays a fixed list of uniform values. `index(n)` maps the next value
/// `u` to `floor(u * n)`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedRng {
    values: VecDeque<f64>,
    consumed: usize,
}

impl ScriptedRng {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            values: values.into_iter().collect(),
            consumed: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.values.len()
    }

    fn next(&mut self) -> f64 {
        self.consumed += 1;
        let u = self.values.pop_front().expect("scripted rng exhausted");
        assert!((0.0..1.0).contains(&u), "scripted value {u} outside [0, 1)");
        u
    }
}

impl RandomSource for ScriptedRng {
    fn uniform(&mut self) -> f64 {
        self.next()
    }

    fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over empty range");
        if n == 1 {
            return 0;
        }
        ((self.next() * n as f64) as usize).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.index(15), b.index(15));
        }
    }

    #[test]
    fn pinned_first_draws() {
        // Guards the cross-platform contract: these values must never change.
        assert_eq!(SeededRng::new(0).next_u64(), 13080132717333068652);
        let mut rng = SeededRng::new(7);
        let draws: Vec<usize> = (0..8).map(|_| rng.index(10)).collect();
        assert_eq!(draws, [1, 7, 7, 6, 3, 8, 2, 5]);
        assert_eq!(SeededRng::new(7).uniform(), 0.15779609702061936);
    }

    #[test]
    fn index_one_consumes_nothing() {
        let mut a = SeededRng::new(3);
        let mut b = SeededRng::new(3);
        assert_eq!(a.index(1), 0);
        assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());

        let mut s = ScriptedRng::new([0.5]);
        assert_eq!(s.index(1), 0);
        assert_eq!(s.consumed(), 0);
    }

    #[test]
    fn forks_are_independent_of_parent() {
        let parent = SeededRng::new(9);
        let mut f1 = parent.fork(1);
        let mut f2 = parent.fork(2);
        assert_ne!(f1.next_u64(), f2.next_u64());
    }

    #[test]
    fn scripted_index_mapping() {
        let mut s = ScriptedRng::new([0.0, 0.34, 0.99, 0.5]);
        assert_eq!(s.index(3), 0);
        assert_eq!(s.index(3), 1);
        assert_eq!(s.index(3), 2);
        assert_eq!(s.uniform(), 0.5);
        assert_eq!(s.consumed(), 4);
    }
}
