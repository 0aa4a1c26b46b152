//! Deterministic seeded substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(master, domain, a, b)`. Every consumer of
/// randomness derives its own substream so results do not depend on the
/// order in which stages or entities are processed.
pub fn substream(master: u64, domain: &str, a: u64, b: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&fnv1a(domain.as_bytes()).to_le_bytes());
    seed[16..24].copy_from_slice(&a.to_le_bytes());
    seed[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
