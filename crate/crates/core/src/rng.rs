use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream.
///
/// Every randomized operation takes one of these explicitly. Independent
/// work items (per utterance, per training step) use [`RngState::stream`]
/// so results do not depend on scheduling order.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `id` of `seed`.
    pub fn stream(seed: u64, id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(id);
        Self { seed, inner }
    }

    /// Stream keyed by two indices, e.g. (step, example).
    pub fn stream2(seed: u64, major: u64, minor: u32) -> Self {
        Self::stream(seed, (major << 32) | minor as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
