//! Counter-based seeding.
//!
//! Every random stream is a ChaCha8 generator whose 256-bit key is the
//! little-endian packing of `(master_seed, trial, particle, slot)`. Distinct
//! tuples give distinct keys, so streams never collide and do not depend on
//! which worker happens to draw them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Slot reserved for drawing initial particles.
pub const INIT_SLOT: u64 = u64::MAX;
/// Slot reserved for problem generation (sensing matrix, ground truth, noise).
pub const PROBLEM_SLOT: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub trial: u64,
    pub particle: u64,
    pub slot: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self {
            master_seed,
            trial,
            particle: 0,
            slot: 0,
        }
    }

    pub fn particle(self, particle: u64) -> Self {
        Self { particle, ..self }
    }

    pub fn slot(self, slot: u64) -> Self {
        Self { slot, ..self }
    }

    pub fn seed_bytes(&self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.trial.to_le_bytes());
        seed[16..24].copy_from_slice(&self.particle.to_le_bytes());
        seed[24..32].copy_from_slice(&self.slot.to_le_bytes());
        seed
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}
