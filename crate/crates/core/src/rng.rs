use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A reproducible random number stream identified by `(seed, substream)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent,
/// platform-stable sequences per substream. Parallel work derives one
/// substream per task index, so results never depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    substream: u64,
}

impl RandomStream {
    pub const fn new(seed: u64) -> Self {
        Self { seed, substream: 0 }
    }

    pub const fn with_substream(seed: u64, substream: u64) -> Self {
        Self { seed, substream }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    pub const fn substream_id(&self) -> u64 {
        self.substream
    }

    /// Child stream for task `id`, distinct from the parent and from every
    /// other child of the same parent.
    pub fn substream(&self, id: u64) -> Self {
        let mixed = splitmix64(self.substream ^ splitmix64(id.wrapping_add(0x5851_f42d_4c95_7f2d)));
        Self {
            seed: self.seed,
            substream: mixed,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.substream);
        rng
    }
}

impl Default for RandomStream {
    fn default() -> Self {
        Self::new(0)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
