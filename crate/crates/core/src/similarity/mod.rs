//! Per-feature pairwise similarity and weighted fusion.

mod nilsimsa;
mod tensor;
mod weights;

use std::cell::Cell;
use std::collections::BTreeSet;

pub use nilsimsa::{Nilsimsa, NilsimsaDigest};
pub use tensor::SimilarityTensor;
pub use weights::{WeightVector, SIMPLEX_TOLERANCE};

use crate::dataset::Sample;

/// Byte placed between API names when a sequence is serialized for hashing.
pub const API_SEPARATOR: u8 = b'\n';

thread_local! {
    static DIGESTS: Cell<u64> = const { Cell::new(0) };
    static JACCARDS: Cell<u64> = const { Cell::new(0) };
}

/// Number of API digests and Jaccard values computed on the current thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComputeCounts {
    pub digests: u64,
    pub jaccards: u64,
}

pub fn compute_counts() -> ComputeCounts {
    ComputeCounts {
        digests: DIGESTS.with(Cell::get),
        jaccards: JACCARDS.with(Cell::get),
    }
}

/// |A ∩ B| / |A ∪ B|. Two empty sets are equal and score 1.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    JACCARDS.with(|c| c.set(c.get() + 1));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(x)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Digest of an API sequence joined in time order with [`API_SEPARATOR`].
pub fn api_digest<S: AsRef<str>>(sequence: &[S]) -> NilsimsaDigest {
    DIGESTS.with(|c| c.set(c.get() + 1));
    let mut n = Nilsimsa::new();
    for (i, name) in sequence.iter().enumerate() {
        if i > 0 {
            n.update(&[API_SEPARATOR]);
        }
        n.update(name.as_ref().as_bytes());
    }
    n.digest()
}

/// Maps a Nilsimsa score in `[-128, 128]` onto `[0, 1]`.
pub fn score_to_unit(score: i32) -> f64 {
    (score as f64 / 128.0 + 1.0) / 2.0
}

pub fn digest_similarity(a: &NilsimsaDigest, b: &NilsimsaDigest) -> f64 {
    score_to_unit(a.compare(b))
}

pub fn api_similarity(a: &Sample, b: &Sample) -> f64 {
    digest_similarity(&api_digest(&a.api_sequence), &api_digest(&b.api_sequence))
}
