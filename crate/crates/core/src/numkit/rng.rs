use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed out by [`RngStream::generator`].
///
/// ChaCha8 is counter based: the key comes from the 64-bit seed and the
/// 64-bit stream id selects an independent keystream.
pub type Generator = ChaCha8Rng;

/// Address of a reproducible random sequence.
///
/// A stream is a plain value. Two equal streams always yield identical
/// draws; derived child streams get their own keystream, so independent
/// pieces of work never share generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

// SplitMix64 finalizer constants.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Child stream addressed by `tag`; the seed is kept and the stream id
    /// is hashed together with the tag.
    pub fn derive(&self, tag: u64) -> RngStream {
        let stream = splitmix64(self.stream ^ splitmix64(tag.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_F42D_4C95_7F2D));
        RngStream { seed: self.seed, stream }
    }

    pub fn derive_path(&self, tags: &[u64]) -> RngStream {
        tags.iter().fold(*self, |s, &t| s.derive(t))
    }

    pub fn generator(&self) -> Generator {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream);
        g
    }
}
