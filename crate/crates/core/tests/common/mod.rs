//! Independent oracles shared by integration tests.

#![allow(dead_code)]

use simnet::netgraph::{Edge, SimilarityGraph, Threshold};
use simnet::similarity::WeightVector;

pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Input bytes for reference digest `index`: length from the first draw
/// (mod 2001), then one byte per draw.
pub fn nilsimsa_input(index: u64) -> Vec<u8> {
    let mut g = SplitMix64(index);
    let n = (g.next_u64() % 2001) as usize;
    (0..n).map(|_| (g.next_u64() & 0xFF) as u8).collect()
}

pub fn hex_bytes(hex: &str) -> Vec<u8> {
    (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).unwrap())
        .collect()
}

/// Data lines of a whitespace-separated fixture file.
pub fn fixture_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect()
}

/// Dense symmetric adjacency of `g`.
pub fn dense(g: &SimilarityGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for e in g.edges() {
        a[e.source][e.target] = e.weight;
        a[e.target][e.source] = e.weight;
    }
    a
}

/// Q = (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j).
pub fn modularity_by_formula(a: &[Vec<f64>], c: &[usize]) -> f64 {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c[i] == c[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `n` items as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            if prefix.is_empty() && c > 0 {
                break;
            }
            prefix.push(c);
            go(prefix, n, max.max(c), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        go(&mut Vec::new(), n, 0, &mut out);
    }
    out
}

/// Random weighted graph on 2..=8 nodes with at least one edge.
pub fn random_graph(rng: &mut SplitMix64) -> SimilarityGraph {
    let n = 2 + (rng.next_u64() % 7) as usize;
    let density = 0.2 + 0.6 * rng.next_f64();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.next_f64() < density {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: 0.05 + 0.95 * rng.next_f64(),
                });
            }
        }
    }
    if edges.is_empty() {
        edges.push(Edge {
            source: 0,
            target: 1,
            weight: 0.5,
        });
    }
    graph(n, edges)
}

pub fn graph(n: usize, edges: Vec<Edge>) -> SimilarityGraph {
    let nodes = (0..n).map(|i| format!("v{i}")).collect();
    SimilarityGraph::from_edges(
        nodes,
        edges,
        Threshold::new(0.0).unwrap(),
        WeightVector::uniform(),
    )
    .unwrap()
}

/// Two 5-cliques (unit weights) joined by one 0.01 edge between nodes 4 and 5.
pub fn bridged_cliques() -> SimilarityGraph {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for i in base..base + 5 {
            for j in i + 1..base + 5 {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: 1.0,
                });
            }
        }
    }
    edges.push(Edge {
        source: 4,
        target: 5,
        weight: 0.01,
    });
    graph(10, edges)
}
