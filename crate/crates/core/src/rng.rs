//! Keyed random-number streams.
//!
//! Every Monte Carlo work item draws from its own [`RngStream`], keyed by the
//! analysis seed and a stream id derived from the work item's role and index.
//! Results therefore do not depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id namespaces. The high 16 bits of a stream id carry the role, the
/// low 48 bits the draw (or replicate) index.
pub(crate) mod role {
    pub const COMPOSITION: u64 = 1;
    pub const SAMPLE_BOOTSTRAP: u64 = 2;
    pub const FEATURE_BOOTSTRAP: u64 = 3;
    pub const LAPLACE_NOISE: u64 = 4;
    pub const BASELINE_SCALE: u64 = 5;
    pub const GENERATOR: u64 = 6;
}

pub(crate) fn stream_id(role: u64, index: u64) -> u64 {
    debug_assert!(index < (1 << 48));
    (role << 48) | (index & ((1 << 48) - 1))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with an index into a fresh 64-bit seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

/// Returns the stream for `(seed, stream_id)`. Identical keys always yield
/// identical sequences; distinct stream ids select disjoint ChaCha streams.
pub fn substream(seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(stream_id);
    RngStream {
        seed,
        stream_id,
        inner,
    }
}

impl RngStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream keyed by this stream's identity and `index`. The parent
    /// is not advanced.
    pub fn derive(&self, index: u64) -> RngStream {
        substream(
            self.seed,
            splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        )
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
