#![allow(dead_code)]

use affinity_core::{AffinityGraph, ServiceId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sid(s: &str) -> ServiceId {
    ServiceId::new(s).unwrap()
}

pub fn names(n: usize) -> Vec<ServiceId> {
    (0..n).map(|i| sid(&format!("s{i:03}"))).collect()
}

/// Random graph with edge probability `p` and weights uniform in [0, 1].
pub fn random_graph(n: usize, p: f64, seed: u64) -> AffinityGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs = names(n);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((vs[i].clone(), vs[j].clone(), rng.gen_range(0.0..=1.0)));
            }
        }
    }
    AffinityGraph::with_weights(vs, edges).unwrap()
}

/// Dense weights straight from the edge list.
pub fn dense(g: &AffinityGraph) -> Vec<Vec<f64>> {
    let n = g.vertex_count();
    let mut w = vec![vec![0.0; n]; n];
    for (pair, e) in g.edges() {
        let i = g.index_of(pair.low()).unwrap();
        let j = g.index_of(pair.high()).unwrap();
        w[i][j] = e.weight;
        w[j][i] = e.weight;
    }
    w
}

/// Cut between the two sides, from the definition.
pub fn brute_cut(w: &[Vec<f64>], in_a: &[bool]) -> f64 {
    let mut cut = 0.0;
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            if in_a[i] != in_a[j] {
                cut += w[i][j];
            }
        }
    }
    cut
}

/// D[x] = external - internal cost, from the definition.
pub fn brute_d(w: &[Vec<f64>], in_a: &[bool], x: usize) -> f64 {
    (0..w.len())
        .filter(|&y| y != x)
        .map(|y| {
            if in_a[x] == in_a[y] {
                -w[x][y]
            } else {
                w[x][y]
            }
        })
        .sum()
}
