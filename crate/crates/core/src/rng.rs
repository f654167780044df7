//! Deterministic, purpose-tagged random streams.
//!
//! Every random draw in a run comes from a stream derived from
//! `(master_seed, purpose, index)`. Streams never share state, so the draws
//! made for epoch 7's label attack do not depend on how many numbers the
//! shuffler or the initializer consumed before it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    PriorNoise,
    EpochAttack,
    Shuffle,
    Init,
    DataGen,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::PriorNoise => 0x7072_696f_725f_6e7a,
            Purpose::EpochAttack => 0x6570_6f63_685f_6174,
            Purpose::Shuffle => 0x7368_7566_666c_6521,
            Purpose::Init => 0x696e_6974_5f77_6774,
            Purpose::DataGen => 0x6461_7461_5f67_656e,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream bound to one purpose.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    purpose: Purpose,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Derive the stream for `(master_seed, purpose, index)`.
    pub fn derive(master_seed: u64, purpose: Purpose, index: u64) -> Self {
        let a = mix64(master_seed);
        let b = mix64(a ^ purpose.tag());
        let c = mix64(b ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019)));
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix64(c.wrapping_add(i as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream {
            seed: c,
            purpose,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// The derived sub-seed (not the master seed).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `true` with probability `p`. `p = 0` never fires, `p = 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
