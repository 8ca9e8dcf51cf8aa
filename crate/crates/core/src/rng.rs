//! Reproducible random streams keyed by `(seed, purpose, replica)`.
//!
//! Every replica of every experiment draws from its own ChaCha8 stream, so
//! results do not depend on how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep the walk and field draws of one replica independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Walk,
    Field,
    IsoLhsWalk,
    IsoLhsField,
    IsoRhsField,
    Generic(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Walk => 0x57a1_6b00,
            Purpose::Field => 0xf1e1_d000,
            Purpose::IsoLhsWalk => 0x150_1000,
            Purpose::IsoLhsField => 0x150_1001,
            Purpose::IsoRhsField => 0x150_2001,
            Purpose::Generic(k) => 0x6e6e_0000_0000 ^ k,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one replica.
pub fn substream(seed: u64, purpose: Purpose, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(purpose.tag())));
    rng.set_stream(replica);
    rng
}
