//! Counter-based random streams.
//!
//! Every Monte Carlo path owns a set of ChaCha8 streams addressed by
//! `(master_seed, path_index, substream)`. A path can therefore be
//! regenerated in isolation, and results never depend on the order in
//! which worker threads visit paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent substreams of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Brownian = 0,
    Jumps = 1,
    /// Free for test harnesses and auxiliary sampling.
    Auxiliary = 2,
}

const SUBSTREAMS: u64 = 4;

/// Address of one path's streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn stream(&self, substream: Substream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index.wrapping_mul(SUBSTREAMS) + substream as u64);
        rng
    }
}
