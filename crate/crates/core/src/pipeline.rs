//! End-to-end run: ingest, similarity, optimize, classify, cross-validate,
//! export.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::dataset::{load_dataset_with, Dataset, LoadMode, SkippedRecord};
use crate::error::{Error, Result};
use crate::evaluation::{classify_full, kfold_crossval, ClusteringReport, CrossValReport};
use crate::export::export_graph;
use crate::netgraph::Threshold;
use crate::optimizer::{optimize_weights, OptimizerConfig, OptimizerTrace};
use crate::similarity::{SimilarityTensor, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub threshold_percent: u32,
    pub iterations: usize,
    pub learning_rate: f64,
    /// 1 skips cross-validation.
    pub k_folds: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub cache_path: Option<PathBuf>,
    pub skip_invalid: bool,
}

impl RunConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let d = OptimizerConfig::default();
        RunConfig {
            dataset_path: dataset_path.into(),
            threshold_percent: 90,
            iterations: d.iterations,
            learning_rate: d.learning_rate,
            k_folds: 5,
            seed: d.seed,
            output_dir: output_dir.into(),
            cache_path: None,
            skip_invalid: false,
        }
    }

    pub fn threshold(&self) -> Result<Threshold> {
        Threshold::from_percent(self.threshold_percent)
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            threshold: self.threshold()?,
            seed: self.seed,
            initial_weights: WeightVector::uniform(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        self.optimizer_config().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Similarity,
    Optimize,
    Classify,
    CrossValidate,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Similarity => "similarity",
            Stage::Optimize => "optimize",
            Stage::Classify => "classify",
            Stage::CrossValidate => "crossval",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Loads the tensor from `cache` when it exists and matches `ds`, otherwise
/// builds it (and writes the cache if a path was given).
pub fn load_or_build_tensor(ds: &Dataset, cache: Option<&Path>) -> Result<SimilarityTensor> {
    if let Some(path) = cache {
        if path.exists() {
            match SimilarityTensor::load(path) {
                Ok(t) if t.matches(ds) => {
                    info!("loaded similarity tensor from {}", path.display());
                    return Ok(t);
                }
                Ok(_) => warn!("{} was built for other samples; rebuilding", path.display()),
                Err(e) => warn!("ignoring unreadable cache {}: {e}", path.display()),
            }
        }
    }
    let t = SimilarityTensor::build(ds);
    if let Some(path) = cache {
        t.save(path)?;
        info!("wrote similarity tensor to {}", path.display());
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub samples: usize,
    pub labeled: usize,
    pub skipped: Vec<SkippedRecord>,
    pub threshold: Threshold,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub initial_error: f64,
    pub best_error: f64,
    pub accepted_moves: usize,
    pub weights: WeightVector,
    pub classification: ClusteringReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossval: Option<CrossValReport>,
}

impl RunReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "samples      {} ({} labeled, {} skipped)\nerror        {:.4} -> {:.4} ({} accepted moves)\n",
            self.samples,
            self.labeled,
            self.skipped.len(),
            self.initial_error,
            self.best_error,
            self.accepted_moves
        );
        out.push_str(&self.classification.to_table());
        if let Some(cv) = &self.crossval {
            out.push('\n');
            out.push_str(&cv.to_table());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub trace: OptimizerTrace,
    pub files: Vec<PathBuf>,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const GRAPH_JSON: &str = "graph.json";
pub const TRACE_JSONL: &str = "trace.jsonl";

pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<PipelineOutcome, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let opt = cfg.optimizer_config().at(Stage::Config)?;

    let mode = if cfg.skip_invalid {
        LoadMode::SkipInvalid
    } else {
        LoadMode::Strict
    };
    let (ds, skipped) = load_dataset_with(&cfg.dataset_path, mode).at(Stage::Ingest)?;
    if ds.labeled_count() == 0 {
        return Err(Error::NoLabeledSamples).at(Stage::Ingest);
    }
    info!("{} samples, {} labeled", ds.len(), ds.labeled_count());

    let t = load_or_build_tensor(&ds, cfg.cache_path.as_deref()).at(Stage::Similarity)?;
    let trace = optimize_weights(&t, &ds, &opt).at(Stage::Optimize)?;
    info!("learned weights {}", trace.best_weights);
    let c =
        classify_full(&t, &ds, &trace.best_weights, opt.threshold, opt.seed).at(Stage::Classify)?;
    let crossval = if cfg.k_folds >= 2 {
        Some(kfold_crossval(&t, &ds, cfg.k_folds, &opt).at(Stage::CrossValidate)?)
    } else {
        None
    };

    let report = RunReport {
        samples: ds.len(),
        labeled: ds.labeled_count(),
        skipped,
        threshold: opt.threshold,
        iterations: opt.iterations,
        learning_rate: opt.learning_rate,
        seed: opt.seed,
        initial_error: trace.initial_error,
        best_error: trace.best_error,
        accepted_moves: trace.accepted_count(),
        weights: trace.best_weights,
        classification: c.report.clone(),
        crossval,
    };

    let files = write_outputs(&cfg.output_dir, &report, &trace, |path| {
        export_graph(&c.graph, &c.partition, &ds, path)
    })
    .at(Stage::Export)?;
    Ok(PipelineOutcome {
        report,
        trace,
        files,
    })
}

fn write_outputs(
    dir: &Path,
    report: &RunReport,
    trace: &OptimizerTrace,
    graph: impl FnOnce(&Path) -> Result<PathBuf>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(REPORT_JSON);
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    let txt = dir.join(REPORT_TXT);
    fs::write(&txt, report.to_table()).map_err(|e| Error::io(&txt, e))?;
    let trace_path = dir.join(TRACE_JSONL);
    let f = fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    trace.write_jsonl(BufWriter::new(f))?;
    let graph_json = dir.join(GRAPH_JSON);
    let dot = graph(&graph_json)?;
    Ok(vec![json, txt, trace_path, graph_json, dot])
}
