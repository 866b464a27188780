use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream identified by `(seed, stream id)`.
///
/// Distinct stream ids under the same seed select non-overlapping ChaCha
/// streams, so they can be handed to independent workers.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Fresh stream with the same seed and a different id.
    pub fn fork(&self, stream: u64) -> RngStream {
        RngStream::new(self.seed, stream)
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
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
