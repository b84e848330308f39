//! Counter-based derivation of independent random streams from one run seed.
//!
//! Every random quantity in a run is drawn from a ChaCha8 generator whose
//! seed is `derive(root, stream, a, b)`. The mixing function is the
//! SplitMix64 finaliser applied in a fixed chain:
//!
//! ```text
//! z0 = mix(root ^ (stream.tag() * 0x9E37_79B9_7F4A_7C15))
//! z1 = mix(z0 ^ a.wrapping_add(0xD1B5_4A32_D192_ED03))
//! z2 = mix(z1 ^ b.wrapping_add(0x8CB9_2BA7_2F3D_8DD7))
//! ```
//!
//! `a` is normally the trial index and `b` the candidate (or replication) index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tag of a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Quadrature,
    OuterNodes,
    Explore,
    Perturb,
    Noise,
    RandomScore,
    InitialDesign,
    Oracle,
    Replication,
    Subsample,
    Split,
}

impl Stream {
    pub const fn tag(self) -> u64 {
        match self {
            Stream::Quadrature => 1,
            Stream::OuterNodes => 2,
            Stream::Explore => 3,
            Stream::Perturb => 4,
            Stream::Noise => 5,
            Stream::RandomScore => 6,
            Stream::InitialDesign => 7,
            Stream::Oracle => 8,
            Stream::Replication => 9,
            Stream::Subsample => 10,
            Stream::Split => 11,
        }
    }
}

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let z0 = mix(root ^ stream.tag().wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let z1 = mix(z0 ^ a.wrapping_add(0xD1B5_4A32_D192_ED03));
    mix(z1 ^ b.wrapping_add(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn stream_rng(root: u64, stream: Stream, a: u64, b: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(root, stream, a, b))
}
