//! Counter-style random streams for reproducible parallel chains.
//!
//! A chain's stream is keyed by the master seed (ChaCha key) and the chain
//! id (ChaCha stream id). Step `t` of the chain starts at word offset
//! `t << STEP_WORD_BITS`, so the random numbers used by a step depend only
//! on `(master_seed, chain, step)` and never on how chains are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per step (`2^32`).
pub const STEP_WORD_BITS: u32 = 32;

/// Largest `n` whose per-step draws are guaranteed to fit in a step's window.
pub const MAX_STREAM_N: usize = 1 << 26;

pub type StreamRng = ChaCha8Rng;

/// The random stream of one chain.
#[derive(Debug, Clone)]
pub struct ChainStream {
    rng: ChaCha8Rng,
}

impl ChainStream {
    pub fn new(master_seed: u64, chain: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(chain);
        ChainStream { rng }
    }

    /// Positions the stream at the start of step `step` and hands it out.
    pub fn at_step(&mut self, step: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos((step as u128) << STEP_WORD_BITS);
        &mut self.rng
    }
}

/// Standalone generator for auxiliary draws (reference samples, shuffles)
/// derived from the master seed. `purpose` separates unrelated uses.
pub fn auxiliary_rng(master_seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x9E37_79B9_7F4A_7C15);
    rng.set_stream(purpose);
    rng
}
