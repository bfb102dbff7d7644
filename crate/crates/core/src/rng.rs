//! Counter-based random streams.
//!
//! Every random quantity is addressed by a key path such as
//! `(run seed, level, sample index)` or `(realization, tolerance index)`.
//! Streams carry no shared state, so results do not depend on which thread
//! touches which sample or in what order.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifier of an independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6A09_E667_F3BC_C908))
    }

    /// Rebuilds a key from its raw value (as stored in a `RealizationState`).
    pub fn from_raw(raw: u64) -> Self {
        StreamKey(raw)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Derives a child key; distinct labels give unrelated streams.
    #[inline]
    pub fn child(self, label: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(label.wrapping_add(GOLDEN))))
    }

    pub fn stream(self) -> Stream {
        Stream {
            key: self.0,
            counter: 0,
        }
    }
}

/// Key of sample `index` on `level` of the run seeded with `seed`.
#[inline]
pub fn realization_key(seed: u64, level: usize, index: u64) -> StreamKey {
    StreamKey::root(seed).child(level as u64).child(index)
}

#[derive(Clone, Debug)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ self.counter.wrapping_mul(GOLDEN))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
