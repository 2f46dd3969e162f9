//! Counter-addressed random streams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream whose key is
//! a hash of `(experiment seed, purpose, round, node, local step)`. Node
//! epochs can therefore run on any number of threads, in any order, and still
//! consume exactly the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Features,
    Contamination,
    Sharding,
    Participation,
    LocalStep,
    /// Free-form streams for tests and tools.
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Features => 1,
            Purpose::Contamination => 2,
            Purpose::Sharding => 3,
            Purpose::Participation => 4,
            Purpose::LocalStep => 5,
            Purpose::Custom(tag) => 0x1000 ^ tag.rotate_left(17),
        }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Factory of independent substreams for one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stream addressed by `(purpose, round, node, step)`.
    pub fn substream(&self, purpose: Purpose, round: u64, node: u64, step: u64) -> StreamRng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for (i, word) in [purpose.tag(), round, node, step].into_iter().enumerate() {
            state ^= word.wrapping_mul(GOLDEN).rotate_left(13 * i as u32 + 7);
            let mixed = splitmix64(&mut state);
            key[i * 8..(i + 1) * 8].copy_from_slice(&mixed.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    pub fn features(&self) -> StreamRng {
        self.substream(Purpose::Features, 0, 0, 0)
    }

    pub fn contamination(&self) -> StreamRng {
        self.substream(Purpose::Contamination, 0, 0, 0)
    }

    pub fn sharding(&self) -> StreamRng {
        self.substream(Purpose::Sharding, 0, 0, 0)
    }

    pub fn participation(&self, round: u64) -> StreamRng {
        self.substream(Purpose::Participation, round, 0, 0)
    }

    pub fn local_step(&self, round: u64, node: usize, step: usize) -> StreamRng {
        self.substream(Purpose::LocalStep, round, node as u64, step as u64)
    }
}
