//! Runtime scaling of `partition_k` on synthetic graphs.
//!
//! Graphs are Erdős–Rényi with edge probability 0.1 and weights uniform in
//! [0, 1], drawn from a ChaCha8 stream seeded per `n`. Only the partitioning
//! call is timed. Cells run one after another on the calling thread.

use std::time::Instant;

use affinity_core::partition::{partition_k_with, SeedSplit};
use affinity_core::{AffinityGraph, ServiceId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

pub const EDGE_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    /// Median over the repeats.
    pub runtime_ms: f64,
    pub bisection_count: usize,
    pub cut_weight: f64,
}

pub fn synthetic_graph(n: usize, p: f64, seed: u64) -> AffinityGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.max(1).to_string().len();
    let vertices: Vec<ServiceId> = (0..n)
        .map(|i| ServiceId::new(format!("svc-{i:0width$}")).expect("non-empty"))
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((
                    vertices[i].clone(),
                    vertices[j].clone(),
                    rng.gen_range(0.0..=1.0),
                ));
            }
        }
    }
    AffinityGraph::with_weights(vertices, edges).expect("synthetic graph is well formed")
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

/// One row per `(n, k)` cell, `n` major.
pub fn run_bench(
    ns: &[usize],
    ks: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, CliError> {
    if repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let g = synthetic_graph(n, EDGE_PROBABILITY, seed.wrapping_add(n as u64));
        for &k in ks {
            let mut times = Vec::with_capacity(repeats);
            let mut last = None;
            for _ in 0..repeats {
                let start = Instant::now();
                let outcome = partition_k_with(&g, k, &SeedSplit::Sorted)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                last = Some(outcome);
            }
            let outcome = last.expect("repeats >= 1");
            rows.push(BenchRow {
                n,
                k,
                runtime_ms: median(times),
                bisection_count: outcome.bisections,
                cut_weight: g.total_cut_weight(&outcome.partition)?,
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
