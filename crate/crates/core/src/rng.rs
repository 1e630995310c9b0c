//! Deterministic random streams.
//!
//! A [`SeededRng`] is a *descriptor* `(seed, stream_id)` rather than a live
//! generator. Every consumer materializes its own ChaCha generator from the
//! descriptor, so a fit that runs on a worker thread draws exactly the same
//! numbers as the same fit run serially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededRng {
    pub seed: u64,
    pub stream_id: u64,
}

/// Tags distinguishing the consumers of a fold-level stream.
pub mod tags {
    pub const OUTER_SPLIT: u64 = 0x006f_7574_6572;
    pub const INNER_SPLIT: u64 = 0x0069_6e6e_6572;
    pub const CALIBRATION: u64 = 0x63_616c_6962;
    pub const MODEL: u64 = 0x006d_6f64_656c;
    pub const MEMBER: u64 = 0x6d65_6d62;
    pub const TREE: u64 = 0x7472_6565;
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        SeededRng { seed, stream_id }
    }

    /// Stream for a cell of the nested cross-validation. Outer and inner fold
    /// indices are offset by one so that index 0 differs from "absent".
    pub fn for_cell(seed: u64, outer: usize, inner: Option<usize>, model_tag: u64) -> Self {
        let inner = inner.map_or(0, |j| j as u64 + 1);
        let id = mix(mix(mix(0, outer as u64 + 1), inner), model_tag);
        SeededRng::with_stream(seed, id)
    }

    /// A child stream, disjoint from `self` and from siblings with other tags.
    pub fn derive(&self, tag: u64) -> Self {
        SeededRng::with_stream(self.seed, mix(self.stream_id, tag))
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

// splitmix64 finalizer over an order-dependent combination
fn mix(acc: u64, value: u64) -> u64 {
    let mut z = acc
        .rotate_left(23)
        .wrapping_add(value)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
