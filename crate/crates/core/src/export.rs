//! Graph documents for force-layout viewers, plus a DOT rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::netgraph::{SimilarityGraph, Threshold};
use crate::optimizer::partition_accuracy;
use crate::similarity::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphNode {
    pub id: String,
    pub family: Option<String>,
    pub community: usize,
    pub predicted_label: String,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphLink {
    /// Node id, not index.
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphMeta {
    pub weights: WeightVector,
    pub threshold: Threshold,
    pub modularity: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub nodes: Vec<GraphNode>,
    pub links: Vec<GraphLink>,
    pub meta: GraphMeta,
}

impl GraphDocument {
    pub fn new(g: &SimilarityGraph, p: &Partition, ds: &Dataset) -> Result<Self> {
        if p.assignment().len() != g.node_count() || ds.len() != g.node_count() {
            return Err(Error::InvalidConfig(format!(
                "partition covers {} nodes, dataset {}, graph {}",
                p.assignment().len(),
                ds.len(),
                g.node_count()
            )));
        }
        let degrees = g.degrees();
        let nodes = g
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, id)| GraphNode {
                id: id.clone(),
                family: ds.family(i).map(str::to_owned),
                community: p.community_of(i),
                predicted_label: p.label_of(i).as_str().to_owned(),
                degree: degrees[i],
            })
            .collect();
        let links = g
            .edges()
            .iter()
            .map(|e| GraphLink {
                source: g.nodes()[e.source].clone(),
                target: g.nodes()[e.target].clone(),
                weight: e.weight,
            })
            .collect();
        Ok(GraphDocument {
            nodes,
            links,
            meta: GraphMeta {
                weights: *g.weights_used(),
                threshold: g.threshold(),
                modularity: p.modularity(),
                accuracy: partition_accuracy(p, ds),
            },
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph document serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a document: unknown fields are rejected and
    /// every link must reference a listed node.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        let ids: std::collections::HashSet<&str> =
            doc.nodes.iter().map(|n| n.id.as_str()).collect();
        if ids.len() != doc.nodes.len() {
            return Err(Error::InvalidConfig(
                "duplicate node id in graph document".into(),
            ));
        }
        for l in &doc.links {
            for end in [&l.source, &l.target] {
                if !ids.contains(end.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "link references unknown node {end:?}"
                    )));
                }
            }
        }
        Ok(doc)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph simnet {\n");
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  {:?} [community={}, label={:?}];",
                n.id, n.community, n.predicted_label
            );
        }
        for l in &self.links {
            let _ = writeln!(
                out,
                "  {:?} -- {:?} [weight={}];",
                l.source, l.target, l.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Writes `path` (JSON) and the same path with a `.dot` extension.
/// Returns the DOT path.
pub fn export_graph(
    g: &SimilarityGraph,
    p: &Partition,
    ds: &Dataset,
    path: &Path,
) -> Result<PathBuf> {
    let doc = GraphDocument::new(g, p, ds)?;
    let dot_path = path.with_extension("dot");
    fs::write(path, doc.to_json()).map_err(|e| Error::io(path, e))?;
    fs::write(&dot_path, doc.to_dot()).map_err(|e| Error::io(&dot_path, e))?;
    Ok(dot_path)
}
