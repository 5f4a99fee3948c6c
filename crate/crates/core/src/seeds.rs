//! Sub-seed derivation.
//!
//! Every random stream in a pipeline is derived from one master seed so that a
//! single `seed` value pins down placements, calibration pools, evaluation runs
//! and validation runs. The derivation is `splitmix64(master ^ (stream * K))`
//! with `K = 0x9E37_79B9_7F4A_7C15`, where `stream` is the discriminant of
//! [`Stream`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Placement = 1,
    Calibration = 2,
    Run = 3,
    Validation = 4,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream) -> u64 {
    splitmix64(master ^ (stream as u64).wrapping_mul(GOLDEN))
}

/// The RNG used throughout. ChaCha8 output is stable across platforms and
/// crate versions, which keeps seeded outputs byte-identical.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
