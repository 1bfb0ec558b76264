use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{api_digest, digest_similarity, jaccard, WeightVector};
use crate::dataset::{Dataset, Feature};
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 14] = b"SIMNET-TENSOR\n";
const CACHE_VERSION: u32 = 1;

/// Cached per-feature similarity matrices over a fixed sample order.
///
/// Matrices are stored densely in row-major order, one per [`Feature`].
/// Fusion under a [`WeightVector`] only reads them, so reweighting never
/// recomputes a digest or a Jaccard value.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTensor {
    sample_order: Vec<String>,
    n: usize,
    matrices: [Vec<f64>; 4],
}

impl SimilarityTensor {
    /// Computes all four matrices for every unordered pair of samples.
    pub fn build(ds: &Dataset) -> SimilarityTensor {
        let n = ds.len();
        let digests: Vec<_> = ds
            .samples()
            .par_iter()
            .map(|s| api_digest(&s.api_sequence))
            .collect();

        let rows: Vec<Vec<[f64; 4]>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = ds.sample(i);
                (i + 1..n)
                    .map(|j| {
                        let b = ds.sample(j);
                        [
                            digest_similarity(&digests[i], &digests[j]),
                            jaccard(&a.permissions, &b.permissions),
                            jaccard(&a.activity_names, &b.activity_names),
                            jaccard(&a.file_names, &b.file_names),
                        ]
                    })
                    .collect()
            })
            .collect();

        let mut matrices: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n * n]);
        for m in matrices.iter_mut() {
            for i in 0..n {
                m[i * n + i] = 1.0;
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (offset, values) in row.iter().enumerate() {
                let j = i + 1 + offset;
                for (f, &v) in values.iter().enumerate() {
                    matrices[f][i * n + j] = v;
                    matrices[f][j * n + i] = v;
                }
            }
        }
        SimilarityTensor {
            sample_order: ds.ids().map(str::to_owned).collect(),
            n,
            matrices,
        }
    }

    /// Assembles a tensor from explicit square matrices, ordered
    /// api, permission, activity, file.
    pub fn from_matrices(sample_order: Vec<String>, matrices: [Vec<Vec<f64>>; 4]) -> Result<Self> {
        let n = sample_order.len();
        let mut dense: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n * n));
        for (f, m) in matrices.iter().enumerate() {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::Tensor(format!("matrix {f} is not {n}x{n}")));
            }
            for row in m {
                dense[f].extend_from_slice(row);
            }
        }
        let t = SimilarityTensor {
            sample_order,
            n,
            matrices: dense,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for (f, m) in self.matrices.iter().enumerate() {
            for i in 0..n {
                if m[i * n + i] != 1.0 {
                    return Err(Error::Tensor(format!(
                        "matrix {f} has diagonal {} at {i}",
                        m[i * n + i]
                    )));
                }
                for j in 0..n {
                    let v = m[i * n + j];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Tensor(format!(
                            "matrix {f} entry ({i},{j}) = {v} outside [0,1]"
                        )));
                    }
                    if v != m[j * n + i] {
                        return Err(Error::Tensor(format!(
                            "matrix {f} is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_order(&self) -> &[String] {
        &self.sample_order
    }

    /// True when the tensor rows line up with the dataset's samples.
    pub fn matches(&self, ds: &Dataset) -> bool {
        self.n == ds.len() && self.sample_order.iter().map(String::as_str).eq(ds.ids())
    }

    #[inline]
    pub fn get(&self, feature: Feature, i: usize, j: usize) -> f64 {
        self.matrices[feature.index()][i * self.n + j]
    }

    /// Weighted sum of the four feature similarities of pair `(i, j)`.
    pub fn final_similarity(&self, w: &WeightVector, i: usize, j: usize) -> Result<f64> {
        for index in [i, j] {
            if index >= self.n {
                return Err(Error::IndexOutOfRange { index, n: self.n });
            }
        }
        Ok(self.fused(w, i, j))
    }

    #[inline]
    pub(crate) fn fused(&self, w: &WeightVector, i: usize, j: usize) -> f64 {
        let k = i * self.n + j;
        let [a, p, act, f] = w.to_array();
        let dot = a * self.matrices[0][k]
            + p * self.matrices[1][k]
            + act * self.matrices[2][k]
            + f * self.matrices[3][k];
        // the weights sum to 1 only up to rounding; dividing keeps an
        // all-ones pair at exactly 1
        (dot / (a + p + act + f)).clamp(0.0, 1.0)
    }

    /// Sub-tensor over `indices`, in that order.
    pub fn restrict(&self, indices: &[usize]) -> Result<SimilarityTensor> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: self.n,
            });
        }
        let m = indices.len();
        let matrices = std::array::from_fn(|f| {
            let src = &self.matrices[f];
            let mut out = Vec::with_capacity(m * m);
            for &i in indices {
                out.extend(indices.iter().map(|&j| src[i * self.n + j]));
            }
            out
        });
        Ok(SimilarityTensor {
            sample_order: indices
                .iter()
                .map(|&i| self.sample_order[i].clone())
                .collect(),
            n: m,
            matrices,
        })
    }

    /// Writes the binary cache: magic line, version, sample ids, then the
    /// strict upper triangle of each matrix as little-endian f64.
    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for id in &self.sample_order {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        for m in &self.matrices {
            for i in 0..self.n {
                for j in i + 1..self.n {
                    w.write_all(&m[i * self.n + j].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<SimilarityTensor> {
        let bad = |what: &str| Error::Tensor(format!("cache: {what}"));
        let mut magic = [0u8; 14];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != CACHE_MAGIC {
            return Err(bad("not a tensor cache"));
        }
        let mut u32_buf = [0u8; 4];
        let mut u64_buf = [0u8; 8];
        r.read_exact(&mut u32_buf)
            .map_err(|_| bad("truncated header"))?;
        let version = u32::from_le_bytes(u32_buf);
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        r.read_exact(&mut u64_buf)
            .map_err(|_| bad("truncated header"))?;
        let n = u64::from_le_bytes(u64_buf) as usize;
        let mut sample_order = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut u32_buf)
                .map_err(|_| bad("truncated ids"))?;
            let mut id = vec![0u8; u32::from_le_bytes(u32_buf) as usize];
            r.read_exact(&mut id).map_err(|_| bad("truncated ids"))?;
            sample_order.push(String::from_utf8(id).map_err(|_| bad("id is not UTF-8"))?);
        }
        let mut matrices: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n * n]);
        for m in matrices.iter_mut() {
            for i in 0..n {
                m[i * n + i] = 1.0;
                for j in i + 1..n {
                    r.read_exact(&mut u64_buf)
                        .map_err(|_| bad("truncated matrix"))?;
                    let v = f64::from_le_bytes(u64_buf);
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
        }
        let t = SimilarityTensor {
            sample_order,
            n,
            matrices,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_cache(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimilarityTensor> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_cache(BufReader::new(file))
    }
}
