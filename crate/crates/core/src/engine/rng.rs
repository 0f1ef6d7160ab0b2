//! Deterministic dice.
//!
//! SplitMix64 (Steele, Lea and Flood; the seeding generator of `java.util.SplittableRandom`):
//! a 64-bit state advanced by the golden-ratio increment and finalized with two
//! xor-shift-multiply rounds. It is tiny, has a single `u64` of state that
//! serializes trivially, and produces the same stream on every platform, which
//! is what replays need.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiceRng {
    state: u64,
}

impl DiceRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..n` by rejection: draws at or above the largest
    /// multiple of `n` are discarded so every residue is equally likely.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// One six-sided die.
    pub fn die(&mut self) -> u8 {
        self.below(6) as u8 + 1
    }
}

/// Derives an independent seed from `(seed, index)`; used to give each
/// simulated game its own stream.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    DiceRng::new(seed ^ index.wrapping_mul(GOLDEN_GAMMA)).next_u64()
}
