//! Exhaustive minimum k-cut for small graphs.
//!
//! Enumerates set partitions into exactly `k` non-empty blocks as restricted
//! growth strings (vertex `i` joins an existing block or opens the next one),
//! accumulating the cut incrementally and pruning branches that cannot beat
//! the best cut found so far. Among equal cuts the first one in enumeration
//! order is returned.

use super::{Partition, PartitionError};
use crate::graph::AffinityGraph;

pub const ORACLE_MAX_VERTICES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Only partitions whose subset sizes match what repeated bisection of
    /// the largest subset produces; see [`size_profile`].
    Algorithm1Sizes,
    Unconstrained,
}

/// Subset sizes (descending) obtained by starting from `[n]` and splitting the
/// largest size `s` into `⌈s/2⌉` and `⌊s/2⌋` until there are `k` sizes.
pub fn size_profile(n: usize, k: usize) -> Vec<usize> {
    let mut sizes = vec![n];
    while sizes.len() < k {
        let (pos, &s) = sizes
            .iter()
            .enumerate()
            .max_by_key(|&(_, s)| *s)
            .expect("non-empty");
        sizes[pos] = s.div_ceil(2);
        sizes.push(s / 2);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

struct Search<'a> {
    n: usize,
    k: usize,
    w: &'a [f64],
    profile: Option<Vec<usize>>,
    max_block: usize,
    block: Vec<usize>,
    sizes: Vec<usize>,
    best_cut: f64,
    best: Option<Vec<usize>>,
}

impl Search<'_> {
    fn go(&mut self, i: usize, used: usize, cut: f64) {
        if cut >= self.best_cut {
            return;
        }
        if i == self.n {
            if used != self.k {
                return;
            }
            if let Some(profile) = &self.profile {
                let mut sizes = self.sizes[..used].to_vec();
                sizes.sort_unstable_by(|a, b| b.cmp(a));
                if &sizes != profile {
                    return;
                }
            }
            self.best_cut = cut;
            self.best = Some(self.block.clone());
            return;
        }
        // blocks still to open must fit in the remaining vertices
        if self.k - used > self.n - i {
            return;
        }
        let limit = if used < self.k { used + 1 } else { used };
        for b in 0..limit {
            if self.sizes[b] == self.max_block {
                continue;
            }
            let added: f64 = (0..i)
                .filter(|&j| self.block[j] != b)
                .map(|j| self.w[i * self.n + j])
                .sum();
            self.block[i] = b;
            self.sizes[b] += 1;
            self.go(i + 1, used.max(b + 1), cut + added);
            self.sizes[b] -= 1;
        }
    }
}

/// Minimum-cut partition of `g` into `k` non-empty subsets. Requires at most
/// [`ORACLE_MAX_VERTICES`] vertices.
pub fn oracle_min_kcut(
    g: &AffinityGraph,
    k: usize,
    balance: Balance,
) -> Result<Partition, PartitionError> {
    let n = g.vertex_count();
    if n > ORACLE_MAX_VERTICES {
        return Err(PartitionError::TooLarge {
            n,
            max: ORACLE_MAX_VERTICES,
        });
    }
    if k == 0 {
        return Err(PartitionError::KNonPositive);
    }
    if k > n {
        return Err(PartitionError::KTooLarge { k, n });
    }

    let mut w = vec![0.0; n * n];
    for (pair, e) in g.edges() {
        let i = g.index_of(pair.low()).expect("edge endpoint is a vertex");
        let j = g.index_of(pair.high()).expect("edge endpoint is a vertex");
        w[i * n + j] = e.weight;
        w[j * n + i] = e.weight;
    }
    let profile = match balance {
        Balance::Algorithm1Sizes => Some(size_profile(n, k)),
        Balance::Unconstrained => None,
    };
    let max_block = profile.as_ref().map_or(n, |p| p[0]);
    let mut search = Search {
        n,
        k,
        w: &w,
        profile,
        max_block,
        block: vec![0; n],
        sizes: vec![0; k],
        best_cut: f64::INFINITY,
        best: None,
    };
    search.go(0, 0, 0.0);
    let block = search
        .best
        .expect("a partition with the requested profile always exists");

    let mut subsets = vec![Vec::new(); k];
    for (i, &b) in block.iter().enumerate() {
        subsets[b].push(g.vertices()[i].clone());
    }
    Ok(Partition::new(subsets))
}
