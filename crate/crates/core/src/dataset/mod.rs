//! Sample records: ingestion, validation and persistence.
//!
//! A dataset file holds one JSON object per line:
//!
//! ```text
//! {"id":"s1","family":"FakeBank","api_sequence":["a","b"],"permissions":["p"],"activity_names":[],"file_names":["f"]}
//! ```
//!
//! `family` may be omitted for unlabeled samples. The four feature fields are
//! required; the three string-set fields are deduplicated on load while
//! `api_sequence` keeps its time order.

mod planted;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use planted::{generate_planted, PlantedConfig};

/// The four per-sample features that are compared pairwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Api,
    Permission,
    Activity,
    File,
}

impl Feature {
    pub const ALL: [Feature; 4] = [
        Feature::Api,
        Feature::Permission,
        Feature::Activity,
        Feature::File,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Record field name carrying this feature.
    pub fn field_name(self) -> &'static str {
        match self {
            Feature::Api => "api_sequence",
            Feature::Permission => "permissions",
            Feature::Activity => "activity_names",
            Feature::File => "file_names",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub api_sequence: Vec<String>,
    pub permissions: BTreeSet<String>,
    pub activity_names: BTreeSet<String>,
    pub file_names: BTreeSet<String>,
}

impl Sample {
    /// Returns the string-set feature, or `None` for the API sequence.
    pub fn string_set(&self, feature: Feature) -> Option<&BTreeSet<String>> {
        match feature {
            Feature::Api => None,
            Feature::Permission => Some(&self.permissions),
            Feature::Activity => Some(&self.activity_names),
            Feature::File => Some(&self.file_names),
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.family.is_some()
    }
}

/// Wire shape of a record before validation; every feature may be absent.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    api_sequence: Option<Vec<String>>,
    #[serde(default)]
    permissions: Option<Vec<String>>,
    #[serde(default)]
    activity_names: Option<Vec<String>>,
    #[serde(default)]
    file_names: Option<Vec<String>>,
}

impl RawRecord {
    fn into_sample(self) -> std::result::Result<Sample, Error> {
        let missing = |field: &'static str| Error::MissingField {
            sample: self.id.clone(),
            field,
        };
        let api_sequence = self
            .api_sequence
            .clone()
            .ok_or_else(|| missing("api_sequence"))?;
        let permissions = self
            .permissions
            .clone()
            .ok_or_else(|| missing("permissions"))?;
        let activity_names = self
            .activity_names
            .clone()
            .ok_or_else(|| missing("activity_names"))?;
        let file_names = self
            .file_names
            .clone()
            .ok_or_else(|| missing("file_names"))?;
        Ok(Sample {
            id: self.id,
            family: self.family.filter(|f| !f.is_empty()),
            api_sequence,
            permissions: permissions.into_iter().collect(),
            activity_names: activity_names.into_iter().collect(),
            file_names: file_names.into_iter().collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Any record missing a feature aborts the load.
    #[default]
    Strict,
    /// Records missing a feature are dropped and reported.
    SkipInvalid,
}

/// A record dropped by [`LoadMode::SkipInvalid`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub line: usize,
    pub id: String,
    pub field: &'static str,
}

/// An immutable, validated collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    label_census: BTreeMap<String, usize>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        let mut label_census = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            if s.id.is_empty() {
                return Err(Error::EmptyId { line: i + 1 });
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: s.id.clone() });
            }
            if let Some(f) = &s.family {
                *label_census.entry(f.clone()).or_insert(0) += 1;
            }
        }
        Ok(Dataset {
            samples,
            label_census,
            index,
        })
    }

    pub fn empty() -> Self {
        Dataset {
            samples: Vec::new(),
            label_census: BTreeMap::new(),
            index: HashMap::new(),
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_census(&self) -> &BTreeMap<String, usize> {
        &self.label_census
    }

    pub fn labeled_count(&self) -> usize {
        self.label_census.values().sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Family label of sample `i`, if any.
    pub fn family(&self, i: usize) -> Option<&str> {
        self.samples[i].family.as_deref()
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples.get(i).cloned().ok_or(Error::IndexOutOfRange {
                    index: i,
                    n: self.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }

    /// Parses line-delimited records. Blank lines are ignored.
    pub fn from_reader<R: BufRead>(
        reader: R,
        mode: LoadMode,
    ) -> Result<(Dataset, Vec<SkippedRecord>)> {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if raw.id.is_empty() {
                return Err(Error::EmptyId { line: line_no });
            }
            match raw.into_sample() {
                Ok(s) => samples.push(s),
                Err(Error::MissingField { sample, field }) if mode == LoadMode::SkipInvalid => {
                    log::warn!("line {line_no}: skipping `{sample}`: missing `{field}`");
                    skipped.push(SkippedRecord {
                        line: line_no,
                        id: sample,
                        field,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok((Dataset::new(samples)?, skipped))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Human-readable label census.
    pub fn census_report(&self) -> String {
        let mut out = String::new();
        let width = self
            .label_census
            .keys()
            .map(|k| k.len())
            .chain(std::iter::once("(unlabeled)".len()))
            .max()
            .unwrap_or(0);
        let _ = writeln!(out, "{:<width$}  {:>7}", "family", "samples");
        for (family, count) in &self.label_census {
            let _ = writeln!(out, "{family:<width$}  {count:>7}");
        }
        let unlabeled = self.len() - self.labeled_count();
        if unlabeled > 0 {
            let _ = writeln!(out, "{:<width$}  {unlabeled:>7}", "(unlabeled)");
        }
        let _ = writeln!(out, "{:<width$}  {:>7}", "total", self.len());
        out
    }
}

/// Loads a dataset file, rejecting records that miss a feature.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset_with(path, LoadMode::Strict).map(|(ds, _)| ds)
}

pub fn load_dataset_with(
    path: impl AsRef<Path>,
    mode: LoadMode,
) -> Result<(Dataset, Vec<SkippedRecord>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_reader(BufReader::new(file), mode)
}
