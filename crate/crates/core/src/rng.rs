//! The per-sketch random source.
//!
//! Every coin a sketch flips comes from one seeded ChaCha8 stream, so a
//! (seed, stream) pair replays bit-for-bit. The generator position is part of
//! the serialized state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchRng {
    inner: ChaCha8Rng,
}

impl SketchRng {
    pub fn seeded(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One fair bit.
    #[inline]
    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Uniform integer in `[0, bound)`; `bound` must be positive.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.inner.random_range(0..bound)
    }

    pub(crate) fn state(&self) -> ([u8; 32], u64, u128) {
        (
            self.inner.get_seed(),
            self.inner.get_stream(),
            self.inner.get_word_pos(),
        )
    }

    pub(crate) fn from_state(seed: [u8; 32], stream: u64, word_pos: u128) -> Self {
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(stream);
        inner.set_word_pos(word_pos);
        Self { inner }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_round_trip_resumes_stream() {
        let mut a = SketchRng::seeded(7);
        for _ in 0..13 {
            a.coin();
        }
        a.below(1000);
        let (seed, stream, pos) = a.state();
        let mut b = SketchRng::from_state(seed, stream, pos);
        for _ in 0..100 {
            assert_eq!(a.below(1 << 40), b.below(1 << 40));
        }
    }
}
