//! Seed derivation.
//!
//! Every random decision in a run is drawn from a named sub-stream of a single
//! base seed, so that e.g. the edge split can be held fixed while the weight
//! initialisation varies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams used across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    Louvain,
    Sparsify,
    Init,
    Dropout,
    Sampling,
    KMeans,
    Sbm,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Split => 0x5350_4c49,
            Stream::Louvain => 0x4c4f_5556,
            Stream::Sparsify => 0x5350_4152,
            Stream::Init => 0x494e_4954,
            Stream::Dropout => 0x4452_4f50,
            Stream::Sampling => 0x5341_4d50,
            Stream::KMeans => 0x4b4d_4541,
            Stream::Sbm => 0x5342_4d00,
        }
    }
}

/// SplitMix64 finaliser.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of sub-stream `stream` under base seed `seed`.
pub fn derive(seed: u64, stream: Stream) -> u64 {
    mix(mix(seed) ^ stream.tag())
}

/// Seed of the `index`-th child of `seed` (restarts, runs).
pub fn child(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    rng(derive(seed, stream))
}
