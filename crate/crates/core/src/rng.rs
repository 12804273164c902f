//! Counter-based random streams.
//!
//! A [`StreamFamily`] fixes a ChaCha8 key from `(seed, purpose, salt)`; each
//! `(replication, index)` pair selects its own 64-bit ChaCha stream. Streams
//! never overlap, so the draws for one stratum do not depend on how many
//! draws any other stratum consumed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a family of streams is used for. Distinct purposes get distinct keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Loss = 1,
    Stratum = 2,
    Oracle = 3,
    Path = 4,
    Inner = 5,
    Mixture = 6,
}

const fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Default spacing between the stream ranges of consecutive replications.
pub const DEFAULT_STREAMS_PER_REPLICATION: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    key: [u8; 32],
    stride: u64,
}

impl StreamFamily {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        Self::salted(seed, purpose, 0)
    }

    /// `salt` separates otherwise identical families, e.g. two study cells.
    pub fn salted(seed: u64, purpose: Purpose, salt: u64) -> Self {
        let mut state = splitmix64(seed ^ splitmix64(purpose as u64));
        state = splitmix64(state ^ splitmix64(salt.wrapping_add(0xA5A5)));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self {
            key,
            stride: DEFAULT_STREAMS_PER_REPLICATION,
        }
    }

    /// Replication `r` owns streams `r * stride .. (r + 1) * stride`.
    pub fn with_stride(mut self, streams_per_replication: u64) -> Self {
        assert!(streams_per_replication > 0, "stride must be positive");
        self.stride = streams_per_replication;
        self
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    /// # Panics
    /// If `index` does not fit in the replication's stream range.
    pub fn stream(&self, replication: u64, index: u64) -> RngStream {
        assert!(
            index < self.stride,
            "stream index {index} exceeds streams per replication {}",
            self.stride
        );
        let id = replication.wrapping_mul(self.stride).wrapping_add(index);
        let mut inner = ChaCha8Rng::from_seed(self.key);
        inner.set_stream(id);
        RngStream { inner }
    }
}

/// A single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Convenience for one-off use: stream 0 of replication 0.
    pub fn from_seed(seed: u64) -> Self {
        StreamFamily::new(seed, Purpose::Loss).stream(0, 0)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
