//! Thresholded similarity networks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{SimilarityTensor, WeightVector};

/// Edge cut-off as a unit fraction. Pairs connect only when their fused
/// similarity is strictly greater than it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Threshold(value))
        } else {
            Err(Error::InvalidThreshold(value))
        }
    }

    /// Integer percent, e.g. `90` for 0.90.
    pub fn from_percent(percent: u32) -> Result<Self> {
        Self::new(percent as f64 / 100.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Threshold::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Undirected weighted graph over the tensor's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    nodes: Vec<String>,
    // source < target, sorted lexicographically
    edges: Vec<Edge>,
    threshold: Threshold,
    weights_used: WeightVector,
}

impl SimilarityGraph {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn weights_used(&self) -> &WeightVector {
        &self.weights_used
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.source] += 1;
            deg[e.target] += 1;
        }
        deg
    }

    /// Neighbor lists `(neighbor, weight)` per node.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push((e.target, e.weight));
            adj[e.target].push((e.source, e.weight));
        }
        adj
    }

    /// Builds a graph from explicit edges; used for fixtures and generic inputs.
    pub fn from_edges(
        nodes: Vec<String>,
        edges: Vec<Edge>,
        threshold: Threshold,
        weights_used: WeightVector,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| {
                if e.source >= n || e.target >= n {
                    return Err(Error::IndexOutOfRange {
                        index: e.source.max(e.target),
                        n,
                    });
                }
                if e.source == e.target {
                    return Err(Error::InvalidConfig(format!(
                        "self-loop on node {}",
                        e.source
                    )));
                }
                if !(e.weight > 0.0 && e.weight.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "edge weight {} must be positive",
                        e.weight
                    )));
                }
                let (s, t) = if e.source < e.target {
                    (e.source, e.target)
                } else {
                    (e.target, e.source)
                };
                Ok(Edge {
                    source: s,
                    target: t,
                    weight: e.weight,
                })
            })
            .collect::<Result<_>>()?;
        edges.sort_by_key(|e| (e.source, e.target));
        if edges
            .windows(2)
            .any(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(Error::InvalidConfig("duplicate edge".into()));
        }
        Ok(SimilarityGraph {
            nodes,
            edges,
            threshold,
            weights_used,
        })
    }
}

/// Connects every pair whose fused similarity exceeds `threshold`.
pub fn build_graph(
    t: &SimilarityTensor,
    w: &WeightVector,
    threshold: Threshold,
) -> SimilarityGraph {
    let n = t.n();
    let cut = threshold.value();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let fs = t.fused(w, i, j);
            if fs > cut {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: fs,
                });
            }
        }
    }
    SimilarityGraph {
        nodes: t.sample_order().to_vec(),
        edges,
        threshold,
        weights_used: *w,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeReport {
    pub degrees: Vec<(String, usize)>,
    pub isolated: Vec<String>,
}

pub fn degree_report(g: &SimilarityGraph) -> DegreeReport {
    let deg = g.degrees();
    let degrees: Vec<(String, usize)> = g.nodes.iter().cloned().zip(deg.iter().copied()).collect();
    let isolated = degrees
        .iter()
        .filter(|(_, d)| *d == 0)
        .map(|(id, _)| id.clone())
        .collect();
    DegreeReport { degrees, isolated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;

    fn uniform_tensor(n: usize, v: f64) -> SimilarityTensor {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { v }).collect())
            .collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        SimilarityTensor::from_matrices(ids, [m.clone(), m.clone(), m.clone(), m]).unwrap()
    }

    /// Pairwise FS (0,1)=0.95, (0,2)=0.85, (1,2)=0.40 under uniform weights.
    fn three_node_tensor() -> SimilarityTensor {
        let pair = |a: [f64; 3]| {
            vec![
                vec![1.0, a[0], a[1]],
                vec![a[0], 1.0, a[2]],
                vec![a[1], a[2], 1.0],
            ]
        };
        // per-feature values (01, 02, 12); column means are 0.95, 0.85, 0.40
        SimilarityTensor::from_matrices(
            vec!["a".into(), "b".into(), "c".into()],
            [
                pair([1.0, 0.7, 0.1]),
                pair([0.9, 1.0, 0.5]),
                pair([0.95, 0.8, 0.6]),
                pair([0.95, 0.9, 0.4]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn three_node_fixture() {
        let t = three_node_tensor();
        let w = WeightVector::uniform();
        assert!((t.final_similarity(&w, 0, 1).unwrap() - 0.95).abs() < 1e-12);
        assert!((t.final_similarity(&w, 0, 2).unwrap() - 0.85).abs() < 1e-12);
        assert!((t.final_similarity(&w, 1, 2).unwrap() - 0.40).abs() < 1e-12);
        let g = build_graph(&t, &w, Threshold::new(0.9).unwrap());
        assert_eq!(g.edge_count(), 1);
        assert_eq!((g.edges()[0].source, g.edges()[0].target), (0, 1));
        assert!((g.edges()[0].weight - 0.95).abs() < 1e-12);
        assert_eq!(degree_report(&g).isolated, vec!["c".to_string()]);
    }

    #[test]
    fn threshold_one_has_no_edges() {
        let t = uniform_tensor(5, 1.0);
        let g = build_graph(&t, &WeightVector::uniform(), Threshold::new(1.0).unwrap());
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 5);
        assert_eq!(degree_report(&g).isolated.len(), 5);
    }

    #[test]
    fn threshold_zero_complete_graph() {
        let t = uniform_tensor(5, 1.0);
        let g = build_graph(
            &t,
            &WeightVector::vertex(Feature::File),
            Threshold::new(0.0).unwrap(),
        );
        assert_eq!(g.edge_count(), 10);
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
        assert!(degree_report(&g).isolated.is_empty());
    }

    #[test]
    fn ties_at_threshold_are_excluded() {
        let t = uniform_tensor(3, 0.5);
        let g = build_graph(&t, &WeightVector::uniform(), Threshold::new(0.5).unwrap());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn threshold_validation() {
        assert!(Threshold::new(1.01).is_err());
        assert!(Threshold::new(-0.01).is_err());
        assert_eq!(Threshold::from_percent(90).unwrap().value(), 0.9);
        assert!(Threshold::from_percent(101).is_err());
    }

    #[test]
    fn from_edges_normalizes_and_validates() {
        let w = WeightVector::uniform();
        let th = Threshold::new(0.0).unwrap();
        let nodes: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let e = |s, t| Edge {
            source: s,
            target: t,
            weight: 1.0,
        };
        let g = SimilarityGraph::from_edges(nodes.clone(), vec![e(2, 0), e(1, 0)], th, w).unwrap();
        assert_eq!((g.edges()[0].source, g.edges()[0].target), (0, 1));
        assert_eq!((g.edges()[1].source, g.edges()[1].target), (0, 2));
        assert!(SimilarityGraph::from_edges(nodes.clone(), vec![e(1, 1)], th, w).is_err());
        assert!(SimilarityGraph::from_edges(nodes.clone(), vec![e(0, 1), e(1, 0)], th, w).is_err());
        assert!(SimilarityGraph::from_edges(nodes, vec![e(0, 3)], th, w).is_err());
    }
}
