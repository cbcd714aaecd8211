//! k-way partitioning of the affinity graph.
//!
//! [`partition_k`] starts from a single subset holding every vertex and keeps
//! bisecting the largest subset with Kernighan-Lin ([`kl_bisect`]) until there
//! are `k` subsets, so it always performs exactly `k - 1` bisections. When
//! several subsets share the largest size, the one whose bisection cuts the
//! least weight is split.
//! [`oracle::oracle_min_kcut`] enumerates every partition of a small graph and
//! is used to check the heuristic.

pub mod kl;
pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AffinityGraph, GraphError};
use crate::ingest::ServiceId;

pub use kl::{kl_bisect, kl_bisect_with, Bisection, SeedSplit};
pub use oracle::{oracle_min_kcut, size_profile, Balance};

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("k must be positive")]
    KNonPositive,
    #[error("k = {k} exceeds the number of vertices ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("bisection needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(ServiceId),
    #[error("vertex `{0}` listed twice")]
    DuplicateVertex(ServiceId),
    #[error("exhaustive oracle limited to {max} vertices, graph has {n}")]
    TooLarge { n: usize, max: usize },
    #[error("partition file declares k = {k} but has {subsets} subsets")]
    KMismatch { k: usize, subsets: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Ordered list of vertex subsets. Members are sorted within each subset;
/// subsets are ordered by size (descending), then by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    subsets: Vec<Vec<ServiceId>>,
}

impl Partition {
    /// Puts `subsets` into canonical order. Coverage is checked against a
    /// graph by [`AffinityGraph::membership`].
    pub fn new(mut subsets: Vec<Vec<ServiceId>>) -> Self {
        for s in &mut subsets {
            s.sort();
        }
        subsets.sort_by(|x, y| {
            y.len()
                .cmp(&x.len())
                .then_with(|| x.first().cmp(&y.first()))
        });
        Partition { subsets }
    }

    pub fn k(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<ServiceId>] {
        &self.subsets
    }

    pub fn block_of(&self, id: &ServiceId) -> Option<usize> {
        self.subsets
            .iter()
            .position(|s| s.binary_search(id).is_ok())
    }

    /// Subset sizes in order.
    pub fn sizes(&self) -> Vec<usize> {
        self.subsets.iter().map(Vec::len).collect()
    }
}

/// Result of [`partition_k_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct KWayOutcome {
    pub partition: Partition,
    pub bisections: usize,
    /// KL passes summed over all bisections, rejected final passes included.
    pub passes: usize,
}

/// Partitions `g` into `k` subsets using the sorted seed split.
pub fn partition_k(g: &AffinityGraph, k: usize) -> Result<Partition, PartitionError> {
    Ok(partition_k_with(g, k, &SeedSplit::Sorted)?.partition)
}

pub fn partition_k_with(
    g: &AffinityGraph,
    k: usize,
    split: &SeedSplit,
) -> Result<KWayOutcome, PartitionError> {
    let n = g.vertex_count();
    if k == 0 {
        return Err(PartitionError::KNonPositive);
    }
    if k > n {
        return Err(PartitionError::KTooLarge { k, n });
    }
    let mut rng = match split {
        SeedSplit::Sorted => None,
        SeedSplit::RandomRestarts { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
    };

    // each subset with its bisection, computed on first need
    let mut subsets: Vec<(Vec<usize>, Option<kl::IndexBisection>)> = vec![((0..n).collect(), None)];
    let (mut bisections, mut passes) = (0, 0);
    while subsets.len() < k {
        let largest = subsets
            .iter()
            .map(|(s, _)| s.len())
            .max()
            .expect("non-empty");
        let tied: Vec<usize> = (0..subsets.len())
            .filter(|&i| subsets[i].0.len() == largest)
            .collect();
        if tied.len() > 1 {
            for &i in &tied {
                if subsets[i].1.is_none() {
                    subsets[i].1 = Some(kl::bisect_indices(g, &subsets[i].0, split, rng.as_mut()));
                }
            }
        }
        // among equally large subsets the cheapest split wins, then the
        // smallest first member
        let pos = tied
            .into_iter()
            .min_by(|&i, &j| {
                let cut = |x: usize| subsets[x].1.as_ref().map_or(0.0, |b| b.cut);
                cut(i)
                    .total_cmp(&cut(j))
                    .then_with(|| subsets[i].0[0].cmp(&subsets[j].0[0]))
            })
            .expect("at least one subset");
        let (members, cached) = subsets.swap_remove(pos);
        let bisection =
            cached.unwrap_or_else(|| kl::bisect_indices(g, &members, split, rng.as_mut()));
        passes += bisection.passes;
        bisections += 1;
        subsets.push((bisection.a, None));
        subsets.push((bisection.b, None));
    }

    let vertices = g.vertices();
    let partition = Partition::new(
        subsets
            .into_iter()
            .map(|(s, _)| s.into_iter().map(|i| vertices[i].clone()).collect())
            .collect(),
    );
    Ok(KWayOutcome {
        partition,
        bisections,
        passes,
    })
}

/// On-disk form of a partition together with its cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub k: usize,
    pub subsets: Vec<Vec<ServiceId>>,
    pub cut_weight: f64,
    pub internal_weight: f64,
}

impl PartitionReport {
    pub fn new(g: &AffinityGraph, p: &Partition) -> Result<Self, PartitionError> {
        Ok(PartitionReport {
            k: p.k(),
            subsets: p.subsets().to_vec(),
            cut_weight: g.total_cut_weight(p)?,
            internal_weight: g.internal_weight(p)?,
        })
    }

    pub fn partition(&self) -> Result<Partition, PartitionError> {
        if self.k != self.subsets.len() {
            return Err(PartitionError::KMismatch {
                k: self.k,
                subsets: self.subsets.len(),
            });
        }
        Ok(Partition::new(self.subsets.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(s: &str) -> ServiceId {
        ServiceId::new(s).unwrap()
    }

    fn ids(names: &[&str]) -> Vec<ServiceId> {
        names.iter().map(|s| sid(s)).collect()
    }

    pub(crate) fn two_triangles() -> AffinityGraph {
        let e = |u: &str, v: &str, w: f64| (sid(u), sid(v), w);
        AffinityGraph::with_weights(
            ids(&["a", "b", "c", "d", "e", "f"]),
            vec![
                e("a", "b", 1.0),
                e("b", "c", 1.0),
                e("a", "c", 1.0),
                e("d", "e", 1.0),
                e("e", "f", 1.0),
                e("d", "f", 1.0),
                e("c", "d", 0.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn canonical_order() {
        let p = Partition::new(vec![ids(&["z"]), ids(&["d", "c"]), ids(&["b", "a"])]);
        assert_eq!(
            p.subsets(),
            &[ids(&["a", "b"]), ids(&["c", "d"]), ids(&["z"])]
        );
        assert_eq!(p.block_of(&sid("d")), Some(1));
        assert_eq!(p.block_of(&sid("q")), None);
    }

    #[test]
    fn k_one_returns_everything() {
        let g = two_triangles();
        let p = partition_k(&g, 1).unwrap();
        assert_eq!(p.subsets(), &[g.vertices().to_vec()]);
        assert_eq!(g.total_cut_weight(&p).unwrap(), 0.0);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let g = two_triangles();
        let out = partition_k_with(&g, 6, &SeedSplit::Sorted).unwrap();
        assert!(out.partition.subsets().iter().all(|s| s.len() == 1));
        assert_eq!(out.bisections, 5);
        let cut = g.total_cut_weight(&out.partition).unwrap();
        assert!((cut - g.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn tied_largest_subsets_split_the_cheaper_one() {
        let e = |u: &str, v: &str| (sid(u), sid(v), 1.0);
        // {a,b,c,d} is a clique, {e,f,g,h} two disjoint edges
        let g = AffinityGraph::with_weights(
            ids(&["a", "b", "c", "d", "e", "f", "g", "h"]),
            vec![
                e("a", "b"),
                e("a", "c"),
                e("a", "d"),
                e("b", "c"),
                e("b", "d"),
                e("c", "d"),
                e("e", "f"),
                e("g", "h"),
            ],
        )
        .unwrap();
        let out = partition_k_with(&g, 3, &SeedSplit::Sorted).unwrap();
        assert_eq!(
            out.partition.subsets(),
            &[
                ids(&["a", "b", "c", "d"]),
                ids(&["e", "f"]),
                ids(&["g", "h"])
            ]
        );
        assert_eq!(g.total_cut_weight(&out.partition).unwrap(), 0.0);
        assert_eq!(out.bisections, 2);
    }

    #[test]
    fn two_triangles_split_on_the_bridge() {
        let g = two_triangles();
        let p = partition_k(&g, 2).unwrap();
        assert_eq!(p.subsets(), &[ids(&["a", "b", "c"]), ids(&["d", "e", "f"])]);
        assert!((g.total_cut_weight(&p).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bad_k() {
        let g = two_triangles();
        assert_eq!(partition_k(&g, 0), Err(PartitionError::KNonPositive));
        assert_eq!(
            partition_k(&g, 7),
            Err(PartitionError::KTooLarge { k: 7, n: 6 })
        );
    }

    #[test]
    fn size_profile_follows_largest_first_bisection() {
        let g = two_triangles();
        for k in 1..=6 {
            let p = partition_k(&g, k).unwrap();
            assert_eq!(p.sizes(), size_profile(6, k));
        }
    }

    #[test]
    fn random_restarts_never_worse_than_sorted_seed() {
        let g = two_triangles();
        let split = SeedSplit::RandomRestarts {
            seed: 7,
            restarts: 4,
        };
        let a = partition_k_with(&g, 2, &split).unwrap();
        let b = partition_k_with(&g, 2, &split).unwrap();
        assert_eq!(a, b);
        let cut = g.total_cut_weight(&a.partition).unwrap();
        assert!(cut <= 0.1 + 1e-12);
    }

    #[test]
    fn report_round_trip_and_k_check() {
        let g = two_triangles();
        let p = partition_k(&g, 2).unwrap();
        let report = PartitionReport::new(&g, &p).unwrap();
        assert!((report.cut_weight - 0.1).abs() < 1e-12);
        assert!((report.internal_weight - 6.0).abs() < 1e-12);
        let text = serde_json::to_string(&report).unwrap();
        let back: PartitionReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.partition().unwrap(), p);

        let mut wrong = report;
        wrong.k = 3;
        assert!(matches!(
            wrong.partition(),
            Err(PartitionError::KMismatch { .. })
        ));
    }
}
