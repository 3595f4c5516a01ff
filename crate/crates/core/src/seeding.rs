//! Deterministic random substreams.
//!
//! Every random draw in a study comes from a `ChaCha8Rng` whose 64-bit seed is
//! derived from the root seed and the coordinates of the work item, and whose
//! ChaCha stream id selects the item within that scope:
//!
//! * population of cell `(p, c)`: `seed = mix(mix(root, p), c.to_bits())`,
//!   stream [`POPULATION_STREAM`];
//! * replication `k` of that cell: same seed, stream `k`.
//!
//! Results therefore do not depend on how replications are scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StudyRng = ChaCha8Rng;

/// Stream reserved for drawing the fixed population of a cell.
pub const POPULATION_STREAM: u64 = u64::MAX;

/// SplitMix64 finalizer applied to `a` combined with `b`.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `(p, c)` cell of a study.
pub fn cell_seed(root: u64, p: usize, c: f64) -> u64 {
    mix(mix(root, p as u64), c.to_bits())
}

pub fn substream(seed: u64, stream: u64) -> StudyRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
