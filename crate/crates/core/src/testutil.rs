use crate::dataset::{Dataset, Sample};
use crate::similarity::SimilarityTensor;

/// Tensor whose four feature matrices all equal `fs`, so every weight
/// vector fuses to `fs`.
pub fn flat_tensor(ids: &[&str], fs: &[Vec<f64>]) -> SimilarityTensor {
    let ids = ids.iter().map(|s| s.to_string()).collect();
    SimilarityTensor::from_matrices(ids, [fs.to_vec(), fs.to_vec(), fs.to_vec(), fs.to_vec()])
        .unwrap()
}

pub fn labeled(ids: &[&str], families: &[Option<&str>]) -> Dataset {
    let samples = ids
        .iter()
        .zip(families)
        .map(|(id, f)| Sample {
            id: id.to_string(),
            family: f.map(str::to_owned),
            ..Sample::default()
        })
        .collect();
    Dataset::new(samples).unwrap()
}

pub const TWELVE_IDS: [&str; 12] = [
    "a0", "a1", "a2", "a3", "a4", "a5", "b0", "b1", "b2", "b3", "b4", "b5",
];

/// Twelve samples in two families, traced by hand at threshold 0.8:
///
/// * a0..a4 pairwise 0.9, b0..b3 pairwise 0.9, bridge a0-b0 0.82
/// * a5 peaks at 0.75, so it is isolated and Unlabeled
/// * b4 (family b) and b5 (family a) share one 0.85 edge; the vote ties
///   and `a` wins, so b4 is wrong and b5 right
///
/// Expected: 10 of 12 correct; row a = [6, 0, 1], row b = [1, 4, 0].
pub fn twelve() -> (Dataset, SimilarityTensor) {
    let mut fs = vec![vec![0.1; 12]; 12];
    let mut set = |i: usize, j: usize, v: f64| {
        fs[i][j] = v;
        fs[j][i] = v;
    };
    for i in 0..5 {
        for j in i + 1..5 {
            set(i, j, 0.9);
        }
        set(i, 5, 0.75);
    }
    for i in 6..10 {
        for j in i + 1..10 {
            set(i, j, 0.9);
        }
    }
    set(0, 6, 0.82);
    set(10, 11, 0.85);
    for (i, row) in fs.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let fam = ["a", "a", "a", "a", "a", "a", "b", "b", "b", "b", "b", "a"];
    let families: Vec<Option<&str>> = fam.iter().map(|f| Some(*f)).collect();
    (
        labeled(&TWELVE_IDS, &families),
        flat_tensor(&TWELVE_IDS, &fs),
    )
}
