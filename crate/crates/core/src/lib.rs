//! Family classification over weighted similarity networks.
//!
//! Samples carry four features: an API call sequence and three string sets
//! (permissions, activity names, file names). Pairwise feature similarities
//! (Nilsimsa for the sequence, Jaccard for the sets) are fused by a weight
//! vector on the simplex, thresholded into a weighted graph and clustered
//! with Louvain. Communities take the plurality family of their labeled
//! members, and the fusion weights are learned by greedy search against
//! the clustering error.

pub mod community;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod netgraph;
pub mod optimizer;
pub mod pipeline;
pub mod similarity;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for stream `stream` of run seed `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}
