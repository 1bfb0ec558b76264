//! Accuracy reports, stratified cross-validation and Unlabeled diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{label_communities, louvain, CommunityLabel, Partition};
use crate::dataset::Dataset;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::netgraph::{build_graph, degree_report, SimilarityGraph, Threshold};
use crate::optimizer::{
    argmax_threshold, cluster, optimize_weights, partition_accuracy, OptimizerConfig,
};
use crate::similarity::{SimilarityTensor, WeightVector};

const FOLD_STREAM: u64 = 0xF01D;
const PREDICT_STREAM: u64 = 0x9ED1C7;

/// Ground-truth family (rows) against predicted label (columns). The last
/// column is always `Unlabeled`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub families: Vec<String>,
    pub columns: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new<'a>(families: impl IntoIterator<Item = &'a str>) -> Self {
        let families: Vec<String> = families.into_iter().map(str::to_owned).collect();
        let mut columns = families.clone();
        columns.push(CommunityLabel::UNLABELED.to_owned());
        let counts = vec![vec![0; columns.len()]; families.len()];
        ConfusionMatrix {
            families,
            columns,
            counts,
        }
    }

    pub fn record(&mut self, truth: &str, predicted: &CommunityLabel) {
        let row = self.family_index(truth);
        let col = match predicted.family() {
            Some(f) => self.family_index(f),
            None => self.columns.len() - 1,
        };
        self.counts[row][col] += 1;
    }

    // unseen families are appended as both a row and a column
    fn family_index(&mut self, family: &str) -> usize {
        if let Some(i) = self.families.iter().position(|f| f == family) {
            return i;
        }
        self.families.push(family.to_owned());
        self.columns
            .insert(self.columns.len() - 1, family.to_owned());
        for r in &mut self.counts {
            r.insert(r.len() - 1, 0);
        }
        self.counts.push(vec![0; self.columns.len()]);
        self.families.len() - 1
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    pub fn diagonal_sum(&self) -> usize {
        (0..self.families.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn unlabeled_column(&self) -> Vec<usize> {
        self.counts.iter().map(|r| *r.last().unwrap()).collect()
    }

    pub fn to_table(&self) -> String {
        let label_w = self
            .families
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6);
        let col_w: Vec<usize> = self.columns.iter().map(|c| c.len().max(4)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "truth");
        for (c, w) in self.columns.iter().zip(&col_w) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
        for (f, row) in self.families.iter().zip(&self.counts) {
            let _ = write!(out, "{f:<label_w$}");
            for (v, w) in row.iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub family: String,
    pub predicted: CommunityLabel,
}

impl Prediction {
    pub fn is_correct(&self) -> bool {
        self.predicted.family() == Some(self.family.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub threshold: Threshold,
    pub weights: WeightVector,
    pub accuracy: f64,
    pub modularity: f64,
    pub community_count: usize,
    /// Nodes (labeled or not) in Unlabeled communities.
    pub unlabeled_count: usize,
    /// Nodes without any edge.
    pub no_connection_ids: Vec<String>,
    pub confusion: ConfusionMatrix,
    /// One entry per labeled sample.
    pub predictions: Vec<Prediction>,
}

impl ClusteringReport {
    pub fn error_count(&self) -> usize {
        self.predictions.iter().filter(|p| !p.is_correct()).count()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "threshold    {}", self.threshold);
        let _ = writeln!(out, "weights      {}", self.weights);
        let _ = writeln!(out, "accuracy     {:.4}", self.accuracy);
        let _ = writeln!(out, "modularity   {:.4}", self.modularity);
        let _ = writeln!(out, "communities  {}", self.community_count);
        let _ = writeln!(out, "unlabeled    {}", self.unlabeled_count);
        let _ = writeln!(out, "isolated     {}", self.no_connection_ids.len());
        out.push('\n');
        out.push_str(&self.confusion.to_table());
        out
    }
}

/// Everything produced by one classification run.
#[derive(Debug, Clone)]
pub struct Classification {
    pub graph: SimilarityGraph,
    pub partition: Partition,
    pub report: ClusteringReport,
}

fn build_report(
    ds: &Dataset,
    g: &SimilarityGraph,
    p: &Partition,
    w: &WeightVector,
    threshold: Threshold,
) -> ClusteringReport {
    let mut confusion = ConfusionMatrix::new(ds.label_census().keys().map(String::as_str));
    let mut predictions = Vec::with_capacity(ds.labeled_count());
    for (i, s) in ds.samples().iter().enumerate() {
        if let Some(f) = &s.family {
            let predicted = p.label_of(i).clone();
            confusion.record(f, &predicted);
            predictions.push(Prediction {
                id: s.id.clone(),
                family: f.clone(),
                predicted,
            });
        }
    }
    let unlabeled_count = (0..ds.len())
        .filter(|&i| *p.label_of(i) == CommunityLabel::Unlabeled)
        .count();
    ClusteringReport {
        threshold,
        weights: *w,
        accuracy: partition_accuracy(p, ds),
        modularity: p.modularity(),
        community_count: p.community_count(),
        unlabeled_count,
        no_connection_ids: degree_report(g).isolated,
        confusion,
        predictions,
    }
}

pub fn classify_full(
    t: &SimilarityTensor,
    ds: &Dataset,
    w: &WeightVector,
    threshold: Threshold,
    seed: u64,
) -> Result<Classification> {
    let (graph, partition) = cluster(t, ds, w, threshold, seed)?;
    let report = build_report(ds, &graph, &partition, w, threshold);
    Ok(Classification {
        graph,
        partition,
        report,
    })
}

/// Clusters with every labeled sample voting and scores the result.
pub fn classify(
    t: &SimilarityTensor,
    ds: &Dataset,
    w: &WeightVector,
    threshold: Threshold,
    seed: u64,
) -> Result<ClusteringReport> {
    classify_full(t, ds, w, threshold, seed).map(|c| c.report)
}

/// Splits labeled sample indices into `k` folds, stratified by family.
///
/// Each family's members are shuffled and dealt round-robin, continuing
/// from the fold where the previous family stopped, so fold sizes differ by
/// at most one. Unlabeled samples belong to no fold.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if let Some((family, &count)) = ds.label_census().iter().find(|(_, &c)| c < k) {
        return Err(Error::Stratification {
            family: family.clone(),
            count,
            k,
        });
    }
    if ds.labeled_count() == 0 {
        return Err(Error::NoLabeledSamples);
    }
    let mut by_family: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples().iter().enumerate() {
        if let Some(f) = &s.family {
            by_family.entry(f).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM));
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_family.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub classification_accuracy: f64,
    pub prediction_accuracy: f64,
    pub weights: WeightVector,
    pub test_size: usize,
    pub unlabeled_predictions: usize,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub k: usize,
    pub threshold: Threshold,
    pub per_fold: Vec<FoldResult>,
    pub mean_classification_accuracy: f64,
    pub mean_prediction_accuracy: f64,
    /// Test-set predictions pooled over all folds.
    pub confusion: ConfusionMatrix,
}

impl CrossValReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "k = {}, threshold = {}", self.k, self.threshold);
        let _ = writeln!(
            out,
            "{:>4}  {:>14}  {:>10}  {:>9}  weights",
            "fold", "classification", "prediction", "unlabeled"
        );
        for f in &self.per_fold {
            let _ = writeln!(
                out,
                "{:>4}  {:>14.4}  {:>10.4}  {:>9}  {}",
                f.fold + 1,
                f.classification_accuracy,
                f.prediction_accuracy,
                f.unlabeled_predictions,
                f.weights
            );
        }
        let _ = writeln!(
            out,
            "mean  {:>14.4}  {:>10.4}",
            self.mean_classification_accuracy, self.mean_prediction_accuracy
        );
        out.push('\n');
        out.push_str(&self.confusion.to_table());
        out
    }
}

/// Predicts the families of `test` nodes by clustering them together with
/// the training nodes; only labeled training nodes vote.
pub fn predict_transductive(
    t: &SimilarityTensor,
    ds: &Dataset,
    w: &WeightVector,
    threshold: Threshold,
    test: &[usize],
    seed: u64,
) -> Result<Vec<Prediction>> {
    let mut is_test = vec![false; ds.len()];
    for &i in test {
        *is_test.get_mut(i).ok_or(Error::IndexOutOfRange {
            index: i,
            n: ds.len(),
        })? = true;
    }
    let voters: Vec<bool> = ds
        .samples()
        .iter()
        .zip(&is_test)
        .map(|(s, &test)| s.is_labeled() && !test)
        .collect();
    debug_assert!(test.iter().all(|&i| !voters[i]));
    let g = build_graph(t, w, threshold);
    let p = label_communities(louvain(&g, seed), ds, &voters)?;
    Ok(test
        .iter()
        .filter_map(|&i| {
            let s = ds.sample(i);
            s.family.as_ref().map(|f| Prediction {
                id: s.id.clone(),
                family: f.clone(),
                predicted: p.label_of(i).clone(),
            })
        })
        .collect())
}

/// Stratified k-fold cross-validation of weight learning and prediction.
pub fn kfold_crossval(
    t: &SimilarityTensor,
    ds: &Dataset,
    k: usize,
    cfg: &OptimizerConfig,
) -> Result<CrossValReport> {
    cfg.validate()?;
    if !t.matches(ds) {
        return Err(Error::Tensor(
            "tensor sample order does not match the dataset".into(),
        ));
    }
    let folds = stratified_folds(ds, k, cfg.seed)?;
    let per_fold = folds
        .par_iter()
        .enumerate()
        .map(|(fold, test)| run_fold(t, ds, cfg, fold, test))
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = ConfusionMatrix::new(ds.label_census().keys().map(String::as_str));
    for f in &per_fold {
        for p in &f.predictions {
            confusion.record(&p.family, &p.predicted);
        }
    }
    let mean =
        |get: fn(&FoldResult) -> f64| per_fold.iter().map(get).sum::<f64>() / per_fold.len() as f64;
    Ok(CrossValReport {
        k,
        threshold: cfg.threshold,
        mean_classification_accuracy: mean(|f| f.classification_accuracy),
        mean_prediction_accuracy: mean(|f| f.prediction_accuracy),
        per_fold,
        confusion,
    })
}

fn run_fold(
    t: &SimilarityTensor,
    ds: &Dataset,
    cfg: &OptimizerConfig,
    fold: usize,
    test: &[usize],
) -> Result<FoldResult> {
    let fold_seed = derive_seed(cfg.seed, fold as u64 + 1);
    let mut is_test = vec![false; ds.len()];
    for &i in test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| !is_test[i]).collect();
    let train_ds = ds.subset(&train)?;
    let train_t = t.restrict(&train)?;
    let trace = optimize_weights(&train_t, &train_ds, &cfg.with_seed(fold_seed))?;

    let predictions = predict_transductive(
        t,
        ds,
        &trace.best_weights,
        cfg.threshold,
        test,
        derive_seed(fold_seed, PREDICT_STREAM),
    )?;
    let correct = predictions.iter().filter(|p| p.is_correct()).count();
    let unlabeled_predictions = predictions
        .iter()
        .filter(|p| p.predicted == CommunityLabel::Unlabeled)
        .count();
    Ok(FoldResult {
        fold,
        classification_accuracy: 1.0 - trace.best_error,
        prediction_accuracy: correct as f64 / predictions.len() as f64,
        weights: trace.best_weights,
        test_size: predictions.len(),
        unlabeled_predictions,
        predictions,
    })
}

/// Cross-validation repeated at each threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValSweep {
    pub points: Vec<CrossValReport>,
    pub best_threshold: Threshold,
}

impl CrossValSweep {
    pub fn accuracy_at(&self, threshold: Threshold) -> Option<f64> {
        self.points
            .iter()
            .find(|r| r.threshold == threshold)
            .map(|r| r.mean_prediction_accuracy)
    }
}

pub fn crossval_sweep(
    t: &SimilarityTensor,
    ds: &Dataset,
    k: usize,
    cfg: &OptimizerConfig,
    thresholds: &[Threshold],
) -> Result<CrossValSweep> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("threshold list is empty".into()));
    }
    let points = thresholds
        .par_iter()
        .map(|&th| kfold_crossval(t, ds, k, &cfg.with_threshold(th)))
        .collect::<Result<Vec<_>>>()?;
    let best_threshold = argmax_threshold(
        points
            .iter()
            .map(|r| (r.threshold, r.mean_prediction_accuracy)),
    );
    Ok(CrossValSweep {
        points,
        best_threshold,
    })
}

/// Error breakdown for one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledBreakdown {
    pub threshold: Threshold,
    pub errors: usize,
    pub unlabeled_errors: usize,
    pub no_connection_errors: usize,
    pub unlabeled_fraction: f64,
    pub no_connection_fraction: f64,
}

/// Attributes each report's misclassifications to Unlabeled communities and
/// to the given persistent isolates. Fractions are 0 when there are no errors.
pub fn unlabeled_report(
    reports: &[ClusteringReport],
    known_no_connection: &BTreeSet<String>,
) -> Vec<UnlabeledBreakdown> {
    reports
        .iter()
        .map(|r| {
            let wrong: Vec<&Prediction> =
                r.predictions.iter().filter(|p| !p.is_correct()).collect();
            let errors = wrong.len();
            let unlabeled_errors = wrong
                .iter()
                .filter(|p| p.predicted == CommunityLabel::Unlabeled)
                .count();
            let no_connection_errors = wrong
                .iter()
                .filter(|p| known_no_connection.contains(&p.id))
                .count();
            let frac = |x: usize| {
                if errors == 0 {
                    0.0
                } else {
                    x as f64 / errors as f64
                }
            };
            UnlabeledBreakdown {
                threshold: r.threshold,
                errors,
                unlabeled_errors,
                no_connection_errors,
                unlabeled_fraction: frac(unlabeled_errors),
                no_connection_fraction: frac(no_connection_errors),
            }
        })
        .collect()
}

/// Samples isolated in every report.
pub fn persistent_isolates(reports: &[ClusteringReport]) -> BTreeSet<String> {
    let mut iter = reports.iter();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let mut common: BTreeSet<String> = first.no_connection_ids.iter().cloned().collect();
    for r in iter {
        let ids: BTreeSet<&String> = r.no_connection_ids.iter().collect();
        common.retain(|id| ids.contains(id));
    }
    common
}

pub fn breakdown_table(rows: &[UnlabeledBreakdown]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>9}  {:>6}  {:>9}  {:>13}  {:>8}  {:>8}",
        "threshold", "errors", "unlabeled", "no-connection", "unl/err", "nc/err"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>9}  {:>6}  {:>9}  {:>13}  {:>8.3}  {:>8.3}",
            r.threshold.to_string(),
            r.errors,
            r.unlabeled_errors,
            r.no_connection_errors,
            r.unlabeled_fraction,
            r.no_connection_fraction
        );
    }
    out
}
