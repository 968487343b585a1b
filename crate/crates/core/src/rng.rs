//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The key is derived from the seed and domain, the
//! 64-bit ChaCha stream id is the index. A pulse, a field block or a bootstrap
//! replicate therefore sees the same numbers no matter which worker runs it or
//! in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SubstreamRng = ChaCha8Rng;

/// Independent uses of the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Pulse = 1,
    FieldNoise = 2,
    StationaryClicks = 3,
    Jitter = 4,
    Bootstrap = 5,
    Auxiliary = 6,
}

/// SplitMix64 finalizer, used to spread `(seed, domain)` over the key space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> SubstreamRng {
    let a = mix(seed ^ mix(domain as u64));
    let b = mix(a ^ 0x5851_f42d_4c95_7f2d);
    let mut key = [0u8; 32];
    for (i, word) in [a, b, mix(a.rotate_left(17)), mix(b.rotate_left(29))]
        .iter()
        .enumerate()
    {
        key[i * 8..(i + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
