//! Named derivation of independent RNG streams from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `(component, index)` under `master`. Stable across platforms and releases.
pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    // FNV-1a over the component name
    let mut name = 0xcbf2_9ce4_8422_2325u64;
    for b in component.bytes() {
        name ^= b as u64;
        name = name.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(splitmix64(master) ^ name) ^ index)
}

pub fn stream(master: u64, component: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, component, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, "synth", 0).random();
        let b: u64 = stream(7, "synth", 0).random();
        assert_eq!(a, b);
        assert_ne!(derive_seed(7, "synth", 0), derive_seed(7, "synth", 1));
        assert_ne!(derive_seed(7, "synth", 0), derive_seed(7, "mock", 0));
        assert_ne!(derive_seed(7, "synth", 0), derive_seed(8, "synth", 0));
    }
}
