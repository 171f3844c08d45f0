//! Counter-based randomness.
//!
//! Every draw is a pure function of `(seed, stream, index)`, so trial `i`
//! sees the same numbers no matter how trials are scheduled across threads.
//! The keystream is ChaCha8 with the stream id as nonce; index `i` reads the
//! `i`-th 64-bit word of that keystream.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Uniform words available per trial block.
pub const DRAWS_PER_TRIAL: usize = 8;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

#[inline]
fn to_unit(word: u64) -> f64 {
    (word >> 11) as f64 * TWO_POW_M53
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomSource { seed, stream }
    }

    /// Same seed, different stream.
    pub fn with_stream(self, stream: u64) -> Self {
        RandomSource { stream, ..self }
    }

    fn rng_at(&self, word: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        // word_pos counts 32-bit words
        rng.set_word_pos(u128::from(word) * 2);
        rng
    }

    /// Raw 64-bit word at `index`.
    pub fn word(&self, index: u64) -> u64 {
        self.rng_at(index).next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn draw_uniform(&self, index: u64) -> f64 {
        to_unit(self.word(index))
    }

    /// The `DRAWS_PER_TRIAL` uniforms reserved for `trial`, i.e.
    /// `draw_uniform(trial * DRAWS_PER_TRIAL + k)` for `k = 0..DRAWS_PER_TRIAL`.
    pub fn trial_uniforms(&self, trial: u64) -> [f64; DRAWS_PER_TRIAL] {
        let mut rng = self.rng_at(trial * DRAWS_PER_TRIAL as u64);
        let mut out = [0.0; DRAWS_PER_TRIAL];
        for slot in &mut out {
            *slot = to_unit(rng.next_u64());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_deterministic() {
        let rs = RandomSource::new(42, 7);
        assert_eq!(rs.draw_uniform(12345), rs.draw_uniform(12345));
        assert_eq!(RandomSource::new(42, 7).word(3), rs.word(3));
        assert_ne!(rs.word(3), rs.word(4));
        assert_ne!(rs.word(3), rs.with_stream(8).word(3));
    }

    #[test]
    fn trial_block_matches_single_draws() {
        let rs = RandomSource::new(1, 1);
        for trial in [0u64, 1, 17, 1 << 40] {
            let block = rs.trial_uniforms(trial);
            for (k, u) in block.iter().enumerate() {
                assert_eq!(*u, rs.draw_uniform(trial * DRAWS_PER_TRIAL as u64 + k as u64));
            }
        }
    }

    #[test]
    fn uniforms_in_unit_interval() {
        let rs = RandomSource::new(9, 0);
        for i in 0..10_000 {
            let u = rs.draw_uniform(i);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
