//! Named, independently seeded random streams.
//!
//! Every consumer of randomness derives its generator from the master seed,
//! a stream tag and a list of indices (realization, slot, ...). Changing how
//! one stream is consumed never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Geometry,
    Shadowing,
    Fading,
    Noise,
    PilotPermutation,
    RandomPilots,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Geometry => 0x67656f6d,
            Stream::Shadowing => 0x73686164,
            Stream::Fading => 0x66616465,
            Stream::Noise => 0x6e6f6973,
            Stream::PilotPermutation => 0x7069_6c6f,
            Stream::RandomPilots => 0x726e_6470,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed from the master seed, a stream and indices.
pub fn derive_seed(master: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream.tag()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream_rng(master: u64, stream: Stream, indices: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, indices))
}
