//! Louvain community detection and community labeling.
//!
//! Phase one starts every node in its own community and repeatedly sweeps
//! the nodes in a seeded random order, moving each node into the neighboring
//! community with the largest positive modularity gain. Phase two collapses
//! every community into a super-node and the process repeats on the smaller
//! graph. The run ends at the first level in which no node moves.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::netgraph::SimilarityGraph;

/// Smallest modularity gain accepted as an improvement.
const MIN_GAIN: f64 = 1e-12;
/// Independent seeded runs per call; the highest modularity wins.
pub const RESTARTS: usize = 4;
const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum CommunityLabel {
    Family(String),
    Unlabeled,
}

impl CommunityLabel {
    pub const UNLABELED: &'static str = "Unlabeled";

    pub fn family(&self) -> Option<&str> {
        match self {
            CommunityLabel::Family(f) => Some(f),
            CommunityLabel::Unlabeled => None,
        }
    }

    pub fn as_str(&self) -> &str {
        self.family().unwrap_or(Self::UNLABELED)
    }
}

impl From<CommunityLabel> for String {
    fn from(l: CommunityLabel) -> String {
        l.as_str().to_owned()
    }
}

impl From<String> for CommunityLabel {
    fn from(s: String) -> Self {
        if s == CommunityLabel::UNLABELED {
            CommunityLabel::Unlabeled
        } else {
            CommunityLabel::Family(s)
        }
    }
}

impl fmt::Display for CommunityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node-to-community assignment over a graph's node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignment: Vec<usize>,
    modularity: f64,
    community_labels: Vec<CommunityLabel>,
    level_count: usize,
}

impl Partition {
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn modularity(&self) -> f64 {
        self.modularity
    }

    pub fn level_count(&self) -> usize {
        self.level_count
    }

    pub fn community_count(&self) -> usize {
        self.community_labels.len()
    }

    pub fn community_labels(&self) -> &[CommunityLabel] {
        &self.community_labels
    }

    /// Label of the community holding `node`.
    pub fn label_of(&self, node: usize) -> &CommunityLabel {
        &self.community_labels[self.assignment[node]]
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count()];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Weighted graph in the form Louvain works on. `self_loop[i]` is the
/// diagonal adjacency entry `A_ii` (twice the internal weight of a
/// super-node) and `degree[i]` includes it.
#[derive(Debug, Clone)]
struct Network {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Network {
    fn from_graph(g: &SimilarityGraph) -> Self {
        let adj = g.adjacency();
        let self_loop = vec![0.0; adj.len()];
        Self::with_loops(adj, self_loop)
    }

    fn with_loops(adj: Vec<Vec<(usize, f64)>>, self_loop: Vec<f64>) -> Self {
        let degree: Vec<f64> = adj
            .iter()
            .zip(&self_loop)
            .map(|(nbrs, l)| l + nbrs.iter().map(|(_, w)| w).sum::<f64>())
            .collect();
        let two_m = degree.iter().sum();
        Network {
            adj,
            self_loop,
            degree,
            two_m,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn modularity(&self, assignment: &[usize]) -> f64 {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut inner = vec![0.0; k];
        let mut total = vec![0.0; k];
        for i in 0..self.len() {
            let c = assignment[i];
            total[c] += self.degree[i];
            inner[c] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                if assignment[j] == c {
                    inner[c] += w;
                }
            }
        }
        inner
            .iter()
            .zip(&total)
            .map(|(i, t)| i / self.two_m - (t / self.two_m).powi(2))
            .sum()
    }

    /// Collapses each community (ids `0..count`) into one node.
    fn aggregate(&self, community: &[usize], count: usize) -> Network {
        let mut members = vec![Vec::new(); count];
        for (i, &c) in community.iter().enumerate() {
            members[c].push(i);
        }
        let mut self_loop = vec![0.0; count];
        let mut adj = Vec::with_capacity(count);
        let mut acc = vec![0.0; count];
        let mut seen = Vec::new();
        for (c, nodes) in members.iter().enumerate() {
            for &i in nodes {
                self_loop[c] += self.self_loop[i];
                for &(j, w) in &self.adj[i] {
                    let d = community[j];
                    if d == c {
                        self_loop[c] += w;
                    } else {
                        if acc[d] == 0.0 {
                            seen.push(d);
                        }
                        acc[d] += w;
                    }
                }
            }
            seen.sort_unstable();
            adj.push(seen.iter().map(|&d| (d, acc[d])).collect());
            for &d in &seen {
                acc[d] = 0.0;
            }
            seen.clear();
        }
        Network::with_loops(adj, self_loop)
    }
}

/// Hooks into a Louvain run, for instrumentation.
pub trait LouvainObserver {
    /// Before each independent run; modularity restarts from singletons.
    fn on_run(&mut self, _run: usize) {}

    /// After each accepted node move, with the running modularity.
    fn on_move(&mut self, _level: usize, _gain: f64, _modularity: f64) {}

    /// After each level that moved at least one node, with the modularity
    /// tracked by the run and the flattened assignment of original nodes.
    fn on_level(&mut self, _level: usize, _modularity: f64, _assignment: &[usize]) {}
}

impl LouvainObserver for () {}

/// Modularity of `assignment` on the weighted graph `g`.
pub fn modularity(g: &SimilarityGraph, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != g.node_count() {
        return Err(Error::InvalidConfig(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            g.node_count()
        )));
    }
    if g.edge_count() == 0 {
        return Err(Error::EdgelessGraph);
    }
    Ok(Network::from_graph(g).modularity(assignment))
}

pub fn louvain(g: &SimilarityGraph, seed: u64) -> Partition {
    louvain_observed(g, seed, &mut ())
}

pub fn louvain_observed<O: LouvainObserver + ?Sized>(
    g: &SimilarityGraph,
    seed: u64,
    observer: &mut O,
) -> Partition {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Partition {
            assignment: (0..n).collect(),
            modularity: 0.0,
            community_labels: vec![CommunityLabel::Unlabeled; n],
            level_count: 0,
        };
    }
    let original = Network::from_graph(g);
    let mut best: Option<Partition> = None;
    for run in 0..RESTARTS {
        observer.on_run(run);
        let p = louvain_run(&original, crate::derive_seed(seed, run as u64), observer);
        if best.as_ref().is_none_or(|b| p.modularity > b.modularity) {
            best = Some(p);
        }
    }
    best.expect("at least one run")
}

fn louvain_run<O: LouvainObserver + ?Sized>(
    original: &Network,
    seed: u64,
    observer: &mut O,
) -> Partition {
    let n = original.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Cow::Borrowed(original);
    let mut flat: Vec<usize> = (0..n).collect();
    let mut q = net.modularity(&flat);
    let mut level = 0;
    // set while `net` is the original graph seeded with the partition so far
    let mut start: Option<Vec<usize>> = None;
    loop {
        match local_moves(&net, start.as_deref(), &mut rng, level, &mut q, observer) {
            Some(community) => {
                let (community, count) = renumber(&community);
                if start.take().is_some() {
                    flat.clone_from(&community);
                } else {
                    for c in flat.iter_mut() {
                        *c = community[*c];
                    }
                }
                observer.on_level(level, q, &flat);
                net = Cow::Owned(net.aggregate(&community, count));
                level += 1;
            }
            // converged: unfold to single nodes and retry from there once
            None if start.is_none() && level > 0 => {
                net = Cow::Borrowed(original);
                start = Some(flat.clone());
            }
            None => break,
        }
    }

    let (assignment, count) = renumber(&flat);
    let modularity = original.modularity(&assignment);
    Partition {
        assignment,
        modularity,
        community_labels: vec![CommunityLabel::Unlabeled; count],
        level_count: level,
    }
}

/// One level of local moves. Returns `None` if no node moved.
fn local_moves<O: LouvainObserver + ?Sized>(
    net: &Network,
    start: Option<&[usize]>,
    rng: &mut ChaCha8Rng,
    level: usize,
    q: &mut f64,
    observer: &mut O,
) -> Option<Vec<usize>> {
    let n = net.len();
    let m = net.two_m / 2.0;
    let mut community: Vec<usize> = start.map_or_else(|| (0..n).collect(), <[usize]>::to_vec);
    let mut total = vec![0.0; n];
    for (i, &c) in community.iter().enumerate() {
        total[c] += net.degree[i];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link_weight = vec![0.0; n];
    let mut is_touched = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;

    for _ in 0..MAX_SWEEPS {
        let mut moves = 0;
        for &i in &order {
            let own = community[i];
            let ki = net.degree[i];

            touched.push(own);
            is_touched[own] = true;
            for &(j, w) in &net.adj[i] {
                let c = community[j];
                if !is_touched[c] {
                    is_touched[c] = true;
                    touched.push(c);
                }
                link_weight[c] += w;
            }

            total[own] -= ki;
            let gain = |c: usize| link_weight[c] - total[c] * ki / net.two_m;
            let stay = gain(own);
            let (mut best, mut best_gain) = (own, stay);
            for &c in &touched {
                let g = gain(c);
                if g > best_gain {
                    best = c;
                    best_gain = g;
                }
            }
            let dq = (best_gain - stay) / m;
            if best != own && dq > MIN_GAIN {
                community[i] = best;
                total[best] += ki;
                *q += dq;
                moves += 1;
                observer.on_move(level, dq, *q);
            } else {
                total[own] += ki;
            }

            for &c in &touched {
                link_weight[c] = 0.0;
                is_touched[c] = false;
            }
            touched.clear();
        }
        if moves == 0 {
            break;
        }
        moved_any = true;
    }
    moved_any.then_some(community)
}

/// Relabels communities to `0..count` by first appearance.
fn renumber(assignment: &[usize]) -> (Vec<usize>, usize) {
    let mut map: Vec<Option<usize>> = vec![None; assignment.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    let out = assignment
        .iter()
        .map(|&c| {
            *map[c].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (out, next)
}

/// Labels each community with the plurality family of its voters.
///
/// `is_voter[i]` marks nodes allowed to vote; unlabeled nodes never vote.
/// Singleton communities and communities without voters are `Unlabeled`.
/// Ties go to the lexicographically smallest family.
pub fn label_communities(mut p: Partition, ds: &Dataset, is_voter: &[bool]) -> Result<Partition> {
    let n = p.assignment.len();
    if ds.len() != n || is_voter.len() != n {
        return Err(Error::InvalidConfig(format!(
            "partition has {n} nodes, dataset {} and voter mask {}",
            ds.len(),
            is_voter.len()
        )));
    }
    let count = p.community_count();
    let sizes = p.community_sizes();
    let mut votes: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); count];
    for (node, &c) in p.assignment.iter().enumerate() {
        if !is_voter[node] {
            continue;
        }
        if let Some(f) = ds.family(node) {
            *votes[c].entry(f).or_insert(0) += 1;
        }
    }
    p.community_labels = votes
        .iter()
        .zip(&sizes)
        .map(|(tally, &size)| {
            if size < 2 {
                return CommunityLabel::Unlabeled;
            }
            let mut best: Option<(&str, usize)> = None;
            for (&family, &n) in tally {
                if best.is_none_or(|(_, b)| n > b) {
                    best = Some((family, n));
                }
            }
            best.map_or(CommunityLabel::Unlabeled, |(f, _)| {
                CommunityLabel::Family(f.to_owned())
            })
        })
        .collect();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use crate::netgraph::{Edge, Threshold};
    use crate::similarity::WeightVector;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph::from_edges(
            (0..n).map(|i| format!("n{i}")).collect(),
            edges
                .iter()
                .map(|&(source, target, weight)| Edge {
                    source,
                    target,
                    weight,
                })
                .collect(),
            Threshold::new(0.0).unwrap(),
            WeightVector::uniform(),
        )
        .unwrap()
    }

    fn clique(offset: usize, k: usize, w: f64, out: &mut Vec<(usize, usize, f64)>) {
        for i in 0..k {
            for j in i + 1..k {
                out.push((offset + i, offset + j, w));
            }
        }
    }

    /// Q straight from the double sum over ordered node pairs.
    fn modularity_by_formula(n: usize, edges: &[(usize, usize, f64)], assignment: &[usize]) -> f64 {
        let mut a = vec![vec![0.0; n]; n];
        for &(i, j, w) in edges {
            a[i][j] += w;
            a[j][i] += w;
        }
        let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let two_m: f64 = k.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if assignment[i] == assignment[j] {
                    q += a[i][j] - k[i] * k[j] / two_m;
                }
            }
        }
        q / two_m
    }

    #[test]
    fn single_community_has_zero_modularity() {
        let mut e = Vec::new();
        clique(0, 4, 0.7, &mut e);
        e.push((3, 4, 0.2));
        let g = graph(5, &e);
        assert!(modularity(&g, &[0; 5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_triangles_half() {
        let mut e = Vec::new();
        clique(0, 3, 1.0, &mut e);
        clique(3, 3, 1.0, &mut e);
        let g = graph(6, &e);
        // each triangle holds half the weight: 2 * (1/2 - (1/2)^2)
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
        let p = louvain(&g, 3);
        assert_eq!(p.community_count(), 2);
        assert!((p.modularity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn modularity_matches_formula() {
        let e = [
            (0, 1, 0.9),
            (1, 2, 0.3),
            (2, 3, 0.8),
            (0, 3, 0.1),
            (1, 3, 0.5),
            (4, 0, 0.95),
        ];
        let g = graph(5, &e);
        for a in [[0, 0, 1, 1, 0], [0, 1, 2, 3, 4], [1, 0, 1, 0, 1]] {
            let q = modularity(&g, &a).unwrap();
            assert!((q - modularity_by_formula(5, &e, &a)).abs() < 1e-12);
        }
    }

    #[test]
    fn modularity_errors() {
        let g = graph(3, &[]);
        assert!(matches!(
            modularity(&g, &[0, 1, 2]),
            Err(Error::EdgelessGraph)
        ));
        let g = graph(3, &[(0, 1, 1.0)]);
        assert!(modularity(&g, &[0, 1]).is_err());
    }

    #[test]
    fn edgeless_graph_gives_singletons() {
        let p = louvain(&graph(4, &[]), 1);
        assert_eq!(p.assignment(), &[0, 1, 2, 3]);
        assert_eq!(p.modularity(), 0.0);
        assert_eq!(p.level_count(), 0);
    }

    #[test]
    fn complete_graph_is_one_community() {
        let mut e = Vec::new();
        clique(0, 7, 1.0, &mut e);
        for seed in 0..5 {
            let p = louvain(&graph(7, &e), seed);
            assert_eq!(p.community_count(), 1);
        }
    }

    #[test]
    fn two_cliques_with_light_bridge() {
        let mut e = Vec::new();
        clique(0, 5, 1.0, &mut e);
        clique(5, 5, 1.0, &mut e);
        e.push((4, 5, 0.01));
        let g = graph(10, &e);
        for seed in 0..10 {
            let p = louvain(&g, seed);
            assert_eq!(p.assignment(), &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut e = Vec::new();
        for i in 0..30usize {
            for j in i + 1..30 {
                if (i * 7 + j * 13) % 5 == 0 {
                    e.push((i, j, 0.5 + ((i + j) % 5) as f64 / 10.0));
                }
            }
        }
        let g = graph(30, &e);
        assert_eq!(louvain(&g, 42), louvain(&g, 42));
    }

    #[derive(Default)]
    struct Run {
        moves: Vec<f64>,
        levels: Vec<(f64, Vec<usize>)>,
    }

    #[derive(Default)]
    struct Recorder {
        runs: Vec<Run>,
    }

    impl LouvainObserver for Recorder {
        fn on_run(&mut self, _: usize) {
            self.runs.push(Run::default());
        }
        fn on_move(&mut self, _: usize, gain: f64, q: f64) {
            assert!(gain > 0.0);
            self.runs.last_mut().unwrap().moves.push(q);
        }
        fn on_level(&mut self, _: usize, q: f64, a: &[usize]) {
            self.runs.last_mut().unwrap().levels.push((q, a.to_vec()));
        }
    }

    #[test]
    fn tracked_modularity_matches_recomputation() {
        let mut e = Vec::new();
        clique(0, 6, 0.9, &mut e);
        clique(6, 5, 0.8, &mut e);
        clique(11, 4, 0.95, &mut e);
        e.extend([(0, 6, 0.3), (7, 12, 0.2), (3, 14, 0.4), (5, 10, 0.6)]);
        let g = graph(15, &e);
        let mut rec = Recorder::default();
        let p = louvain_observed(&g, 9, &mut rec);
        assert_eq!(rec.runs.len(), RESTARTS);
        let mut best = f64::NEG_INFINITY;
        for run in &rec.runs {
            assert!(run.moves.windows(2).all(|w| w[1] > w[0]));
            assert!(run.levels.windows(2).all(|w| w[1].0 >= w[0].0));
            for (q, a) in &run.levels {
                assert!((q - modularity_by_formula(15, &e, a)).abs() < 1e-9);
            }
            best = best.max(run.levels.last().unwrap().0);
        }
        assert!((p.modularity() - best).abs() < 1e-9);
        assert!(rec.runs.iter().any(|r| r.levels.len() == p.level_count()));
    }

    fn labeled(id: &str, family: Option<&str>) -> Sample {
        Sample {
            id: id.into(),
            family: family.map(Into::into),
            api_sequence: vec![],
            permissions: Default::default(),
            activity_names: Default::default(),
            file_names: Default::default(),
        }
    }

    #[test]
    fn plurality_singletons_and_voterless_communities() {
        let ds = Dataset::new(vec![
            labeled("a", Some("FakeBank")),
            labeled("b", Some("FakeBank")),
            labeled("c", Some("Gepew")),
            labeled("d", Some("Gepew")),
            labeled("e", Some("SmsSpy")),
            labeled("f", Some("Bankun")),
            labeled("g", Some("Gidix")),
        ])
        .unwrap();
        let p = Partition {
            assignment: vec![0, 0, 0, 1, 1, 2, 3],
            modularity: 0.0,
            community_labels: vec![CommunityLabel::Unlabeled; 4],
            level_count: 1,
        };
        let mut voters = vec![true; 7];
        voters[3] = false;
        voters[4] = false;
        voters[6] = false;
        let p = label_communities(p, &ds, &voters).unwrap();
        assert_eq!(
            p.community_labels()[0],
            CommunityLabel::Family("FakeBank".into())
        );
        // community {d, e} has no voters
        assert_eq!(p.community_labels()[1], CommunityLabel::Unlabeled);
        // singleton, even though it votes
        assert_eq!(p.community_labels()[2], CommunityLabel::Unlabeled);
        assert_eq!(p.community_labels()[3], CommunityLabel::Unlabeled);
    }

    #[test]
    fn plurality_ties_break_lexicographically() {
        let ds = Dataset::new(vec![
            labeled("a", Some("Gepew")),
            labeled("b", Some("FakeBank")),
            labeled("c", None),
        ])
        .unwrap();
        let p = Partition {
            assignment: vec![0, 0, 0],
            modularity: 0.0,
            community_labels: vec![CommunityLabel::Unlabeled],
            level_count: 1,
        };
        let p = label_communities(p, &ds, &[true; 3]).unwrap();
        assert_eq!(p.label_of(2).as_str(), "FakeBank");
    }

    #[test]
    fn label_serde() {
        let s = serde_json::to_string(&CommunityLabel::Unlabeled).unwrap();
        assert_eq!(s, "\"Unlabeled\"");
        let l: CommunityLabel = serde_json::from_str("\"Gepew\"").unwrap();
        assert_eq!(l, CommunityLabel::Family("Gepew".into()));
    }
}
