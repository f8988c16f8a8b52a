//! Reproducible random substreams.
//!
//! A [`SeedTree`] is a node in a hierarchy of named substreams rooted at the
//! master seed. Children are derived by hashing the parent key with a tag, so
//! the stream used for, say, photon 17 of realization 3 of a sweep depends only
//! on those coordinates and never on how work is scheduled across threads.
//! Leaf generators are ChaCha8 keyed by the node with the ChaCha stream id set
//! to a caller-supplied counter.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known tags for top-level substreams.
pub mod tags {
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const SWEEP: u64 = 0x5357_4550;
    pub const TRACE: u64 = 0x5452_4143;
    pub const TEMPLATE: u64 = 0x544d_504c;
    pub const BENCH: u64 = 0x4245_4e43;
    pub const BER: u64 = 0x4245_5231;
    pub const CALIBRATION: u64 = 0x4341_4c42;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: [u64; 4],
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        let mut s = master_seed;
        SeedTree {
            key: [
                splitmix64(&mut s),
                splitmix64(&mut s),
                splitmix64(&mut s),
                splitmix64(&mut s),
            ],
        }
    }

    /// Derive the child node for `tag`.
    pub fn child(&self, tag: u64) -> Self {
        let mut s = tag ^ 0xD6E8_FEB8_6659_FD93;
        let mut key = [0u64; 4];
        for (i, k) in key.iter_mut().enumerate() {
            s ^= self.key[i];
            *k = splitmix64(&mut s);
        }
        SeedTree { key }
    }

    /// Collapse this node to a single 64-bit seed (for APIs that take `u64`).
    pub fn seed(&self) -> u64 {
        let mut s = self.key[0] ^ self.key[1].rotate_left(17) ^ self.key[2].rotate_left(31);
        s ^= self.key[3].rotate_left(47);
        splitmix64(&mut s)
    }

    /// Generator for counter `stream` under this node.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        for (chunk, k) in bytes.chunks_exact_mut(8).zip(self.key.iter()) {
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(stream);
        rng
    }
}
