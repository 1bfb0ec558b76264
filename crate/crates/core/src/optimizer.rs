//! Greedy search for fusion weights.
//!
//! Each iteration perturbs one coordinate of the incumbent weights by the
//! learning rate, clusters the reweighted graph and keeps the proposal only
//! when its clustering error is strictly lower.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{label_communities, louvain, Partition};
use crate::dataset::Dataset;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::netgraph::{build_graph, SimilarityGraph, Threshold};
use crate::similarity::{SimilarityTensor, WeightVector};

/// Seed stream for weight proposals; Louvain runs use streams `0..=iterations`.
const PROPOSAL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub threshold: Threshold,
    pub seed: u64,
    pub initial_weights: WeightVector,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            iterations: 1000,
            learning_rate: 0.05,
            threshold: Threshold::new(0.9).unwrap(),
            seed: 0,
            initial_weights: WeightVector::uniform(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} is outside (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn with_threshold(&self, threshold: Threshold) -> Self {
        OptimizerConfig {
            threshold,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        OptimizerConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub weights: WeightVector,
    pub error: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub initial_error: f64,
    pub best_weights: WeightVector,
    pub best_error: f64,
    /// One entry per iteration, `1..=iterations`.
    pub history: Vec<TraceEntry>,
}

impl OptimizerTrace {
    /// Incumbent error after each iteration.
    pub fn best_error_curve(&self) -> Vec<f64> {
        let mut best = self.initial_error;
        self.history
            .iter()
            .map(|e| {
                if e.accepted {
                    best = e.error;
                }
                best
            })
            .collect()
    }

    pub fn accepted_count(&self) -> usize {
        self.history.iter().filter(|e| e.accepted).count()
    }

    /// One JSON record per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for entry in &self.history {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }
}

fn check_inputs(t: &SimilarityTensor, ds: &Dataset) -> Result<()> {
    if !t.matches(ds) {
        return Err(Error::Tensor(
            "tensor sample order does not match the dataset".into(),
        ));
    }
    if ds.labeled_count() == 0 {
        return Err(Error::NoLabeledSamples);
    }
    Ok(())
}

/// Graph, Louvain partition and labels with every labeled node voting.
pub fn cluster(
    t: &SimilarityTensor,
    ds: &Dataset,
    w: &WeightVector,
    threshold: Threshold,
    seed: u64,
) -> Result<(SimilarityGraph, Partition)> {
    check_inputs(t, ds)?;
    let g = build_graph(t, w, threshold);
    let voters: Vec<bool> = ds.samples().iter().map(|s| s.is_labeled()).collect();
    let p = label_communities(louvain(&g, seed), ds, &voters)?;
    Ok((g, p))
}

/// Fraction of labeled samples whose community label differs from their
/// family. Members of `Unlabeled` communities count as wrong.
pub fn partition_accuracy(p: &Partition, ds: &Dataset) -> f64 {
    let (mut correct, mut labeled) = (0usize, 0usize);
    for (i, s) in ds.samples().iter().enumerate() {
        if let Some(f) = &s.family {
            labeled += 1;
            if p.label_of(i).family() == Some(f.as_str()) {
                correct += 1;
            }
        }
    }
    correct as f64 / labeled as f64
}

pub fn clustering_error(
    t: &SimilarityTensor,
    ds: &Dataset,
    w: &WeightVector,
    threshold: Threshold,
    seed: u64,
) -> Result<f64> {
    let (_, p) = cluster(t, ds, w, threshold, seed)?;
    Ok(1.0 - partition_accuracy(&p, ds))
}

/// Moves one random coordinate of `incumbent` by `±learning_rate`, clamps at
/// zero and renormalizes onto the simplex.
pub fn propose<R: Rng + ?Sized>(
    incumbent: &WeightVector,
    learning_rate: f64,
    rng: &mut R,
) -> WeightVector {
    let mut w = incumbent.to_array();
    let coord = rng.gen_range(0..4);
    let step = if rng.gen_bool(0.5) {
        learning_rate
    } else {
        -learning_rate
    };
    w[coord] = (w[coord] + step).max(0.0);
    WeightVector::normalized(w).unwrap_or(*incumbent)
}

pub fn optimize_weights(
    t: &SimilarityTensor,
    ds: &Dataset,
    cfg: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    cfg.validate()?;
    check_inputs(t, ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PROPOSAL_STREAM));
    let initial_error = clustering_error(
        t,
        ds,
        &cfg.initial_weights,
        cfg.threshold,
        derive_seed(cfg.seed, 0),
    )?;
    let mut best_weights = cfg.initial_weights;
    let mut best_error = initial_error;
    let mut history = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let weights = propose(&best_weights, cfg.learning_rate, &mut rng);
        let error = clustering_error(
            t,
            ds,
            &weights,
            cfg.threshold,
            derive_seed(cfg.seed, iteration as u64),
        )?;
        let accepted = error < best_error;
        if accepted {
            log::debug!(
                "iteration {iteration}: error {best_error:.4} -> {error:.4} with {weights}"
            );
            best_weights = weights;
            best_error = error;
        }
        history.push(TraceEntry {
            iteration,
            weights,
            error,
            accepted,
        });
    }
    Ok(OptimizerTrace {
        initial_error,
        best_weights,
        best_error,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: Threshold,
    pub best_weights: WeightVector,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Threshold with the highest accuracy; the lowest such threshold on ties.
    pub best_threshold: Threshold,
}

/// Independent weight optimization at each threshold.
pub fn threshold_sweep(
    t: &SimilarityTensor,
    ds: &Dataset,
    cfg: &OptimizerConfig,
    thresholds: &[Threshold],
) -> Result<SweepReport> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("threshold list is empty".into()));
    }
    let points = thresholds
        .par_iter()
        .map(|&th| {
            let trace = optimize_weights(t, ds, &cfg.with_threshold(th))?;
            Ok(SweepPoint {
                threshold: th,
                best_weights: trace.best_weights,
                accuracy: 1.0 - trace.best_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_threshold = argmax_threshold(points.iter().map(|p| (p.threshold, p.accuracy)));
    Ok(SweepReport {
        points,
        best_threshold,
    })
}

pub(crate) fn argmax_threshold(points: impl Iterator<Item = (Threshold, f64)>) -> Threshold {
    let mut best: Option<(Threshold, f64)> = None;
    for (th, acc) in points {
        let better = match best {
            None => true,
            Some((bt, ba)) => acc > ba || (acc == ba && th < bt),
        };
        if better {
            best = Some((th, acc));
        }
    }
    best.expect("non-empty sweep").0
}

/// Thresholds from `from` to `to` percent inclusive.
pub fn percent_range(from: u32, to: u32, step: u32) -> Result<Vec<Threshold>> {
    if step == 0 || from > to {
        return Err(Error::InvalidConfig(format!(
            "bad threshold range {from}..={to} step {step}"
        )));
    }
    (from..=to)
        .step_by(step as usize)
        .map(Threshold::from_percent)
        .collect()
}
