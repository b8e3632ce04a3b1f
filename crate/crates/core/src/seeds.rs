//! Deterministic seed derivation for parallel and sweep work.
//!
//! The seed-splitting contract used everywhere in this crate:
//!
//! ```text
//! child = splitmix64(master ^ (stream + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `splitmix64` is the standard 64-bit finalizer below. The mix is
//! stable across platforms and crate versions, so any sweep cell or
//! Monte-Carlo trial can be reproduced in isolation from `(master, stream)`.

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives the seed for stream `stream` from a master seed.
pub fn child_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ stream.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15))
}
