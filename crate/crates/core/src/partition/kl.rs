//! Kernighan-Lin bisection.
//!
//! A pass tentatively swaps `⌊m/2⌋` pairs, each time picking the unlocked pair
//! `(a, b)` of largest gain `D[a] + D[b] - 2c(a, b)`, locking it and updating
//! the `D` values as if the swap had happened. The prefix of swaps with the
//! largest total gain `g_max` is then applied. Passes repeat until
//! `g_max <= 0`.
//!
//! Vertices are addressed by local index into a [`CostMatrix`]; local order is
//! lexicographic, so "smallest index" is "lexicographically smallest id".

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::PartitionError;
use crate::graph::AffinityGraph;
use crate::ingest::ServiceId;

/// Hard cap on passes per bisection.
pub const MAX_PASSES: usize = 100;

/// A pass is applied only if its best prefix gain exceeds this. Gains are
/// accumulated in floating point; smaller values are rounding noise.
pub const GAIN_EPSILON: f64 = 1e-12;

/// How the initial balanced split of a bisection is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedSplit {
    /// First `⌈m/2⌉` vertices in lexicographic order form side A.
    #[default]
    Sorted,
    /// The sorted split plus `restarts` shuffled splits drawn from a ChaCha8
    /// stream seeded with `seed`; the lowest cut wins, earlier candidates on ties.
    RandomRestarts { seed: u64, restarts: usize },
}

/// Dense symmetric cost matrix over a vertex subset. Non-adjacent pairs cost 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    w: Vec<f64>,
}

impl CostMatrix {
    pub fn zeros(n: usize) -> Self {
        CostMatrix {
            n,
            w: vec![0.0; n * n],
        }
    }

    /// Costs between `members` (global vertex indices of `g`). Local index `i`
    /// is `members[i]`.
    pub fn for_subset(g: &AffinityGraph, members: &[usize]) -> Self {
        let mut local = vec![usize::MAX; g.vertex_count()];
        for (i, &m) in members.iter().enumerate() {
            local[m] = i;
        }
        let mut costs = CostMatrix::zeros(members.len());
        for (i, &m) in members.iter().enumerate() {
            for &(nb, w) in g.neighbors(m) {
                let j = local[nb];
                if j != usize::MAX {
                    costs.w[i * costs.n + j] = w;
                }
            }
        }
        costs
    }

    pub fn from_graph(g: &AffinityGraph) -> Self {
        let all: Vec<usize> = (0..g.vertex_count()).collect();
        Self::for_subset(g, &all)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        self.w[i * self.n + j] = w;
        self.w[j * self.n + i] = w;
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Weight between side A (`in_a[i] == true`) and side B.
    pub fn cut(&self, in_a: &[bool]) -> f64 {
        let mut cut = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if in_a[i] != in_a[j] {
                    cut += self.cost(i, j);
                }
            }
        }
        cut
    }
}

/// External minus internal cost of every vertex.
pub fn compute_d(costs: &CostMatrix, in_a: &[bool]) -> Vec<f64> {
    (0..costs.len())
        .map(|x| {
            costs
                .row(x)
                .iter()
                .enumerate()
                .filter(|&(y, _)| y != x)
                .map(|(y, &c)| if in_a[y] == in_a[x] { -c } else { c })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Swap {
    /// Vertex taken from side A.
    pub a: usize,
    /// Vertex taken from side B.
    pub b: usize,
    pub gain: f64,
}

/// State of one KL pass.
#[derive(Debug, Clone)]
pub struct PassState<'c> {
    costs: &'c CostMatrix,
    /// Sides with every recorded swap already applied.
    in_a: Vec<bool>,
    d: Vec<f64>,
    locked: Vec<bool>,
    swaps: Vec<Swap>,
}

impl<'c> PassState<'c> {
    pub fn new(costs: &'c CostMatrix, in_a: Vec<bool>) -> Self {
        assert_eq!(costs.len(), in_a.len(), "side vector length mismatch");
        let d = compute_d(costs, &in_a);
        PassState {
            costs,
            locked: vec![false; in_a.len()],
            in_a,
            d,
            swaps: Vec::new(),
        }
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn in_a(&self) -> &[bool] {
        &self.in_a
    }

    pub fn is_locked(&self, v: usize) -> bool {
        self.locked[v]
    }

    /// Recorded swaps, i.e. the aligned `gv`, `av`, `bv` sequences.
    pub fn swaps(&self) -> &[Swap] {
        &self.swaps
    }

    /// Cut reduction of swapping `a` (side A) with `b` (side B) from the
    /// current tentative sides.
    pub fn gain(&self, a: usize, b: usize) -> f64 {
        self.d[a] + self.d[b] - 2.0 * self.costs.cost(a, b)
    }

    fn unlocked(&self, side_a: bool) -> Vec<usize> {
        (0..self.in_a.len())
            .filter(|&v| !self.locked[v] && self.in_a[v] == side_a)
            .collect()
    }

    /// Highest-gain unlocked pair; ties go to the smallest `a`, then `b`.
    pub fn best_swap(&self) -> Option<Swap> {
        let side_a = self.unlocked(true);
        let side_b = self.unlocked(false);
        let mut best: Option<Swap> = None;
        for &a in &side_a {
            let da = self.d[a];
            let row = self.costs.row(a);
            for &b in &side_b {
                let gain = da + self.d[b] - 2.0 * row[b];
                if best.is_none_or(|s| gain > s.gain) {
                    best = Some(Swap { a, b, gain });
                }
            }
        }
        best
    }

    /// Picks, locks and records the best pair, then updates `D` of the
    /// remaining unlocked vertices. `None` once either side is exhausted.
    pub fn step(&mut self) -> Option<Swap> {
        let swap = self.best_swap()?;
        let (a, b) = (swap.a, swap.b);
        self.locked[a] = true;
        self.locked[b] = true;
        self.in_a[a] = false;
        self.in_a[b] = true;
        let (row_a, row_b) = (self.costs.row(a), self.costs.row(b));
        for x in 0..self.d.len() {
            if self.locked[x] {
                continue;
            }
            let delta = 2.0 * row_a[x] - 2.0 * row_b[x];
            if self.in_a[x] {
                self.d[x] += delta;
            } else {
                self.d[x] -= delta;
            }
        }
        self.swaps.push(swap);
        Some(swap)
    }

    /// Runs the pass to completion.
    pub fn run(&mut self) -> &[Swap] {
        while self.step().is_some() {}
        &self.swaps
    }

    /// `(t, g_max)`: the prefix length maximizing the summed gain and that sum.
    /// The shortest such prefix wins. `None` before any step.
    pub fn best_prefix(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut sum = 0.0;
        for (i, s) in self.swaps.iter().enumerate() {
            sum += s.gain;
            if best.is_none_or(|(_, g)| sum > g) {
                best = Some((i + 1, sum));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    pub steps: usize,
    pub t: usize,
    pub g_max: f64,
    pub accepted: bool,
    pub cut_before: f64,
    pub cut_after: f64,
    pub in_a_after: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionTrace {
    pub in_a: Vec<bool>,
    pub passes: Vec<PassRecord>,
}

/// Improves a bisection by KL passes until no pass has positive gain.
pub fn refine(costs: &CostMatrix, mut in_a: Vec<bool>) -> BisectionTrace {
    let mut passes = Vec::new();
    let mut cut = costs.cut(&in_a);
    for _ in 0..MAX_PASSES {
        let mut pass = PassState::new(costs, in_a.clone());
        let steps = pass.run().len();
        let (t, g_max) = pass.best_prefix().unwrap_or((0, 0.0));
        let accepted = g_max > GAIN_EPSILON;
        let cut_before = cut;
        if accepted {
            for s in &pass.swaps()[..t] {
                in_a[s.a] = false;
                in_a[s.b] = true;
            }
            cut = costs.cut(&in_a);
        }
        passes.push(PassRecord {
            steps,
            t,
            g_max,
            accepted,
            cut_before,
            cut_after: cut,
            in_a_after: in_a.clone(),
        });
        if !accepted {
            break;
        }
    }
    BisectionTrace { in_a, passes }
}

/// Balanced seed split: the first `⌈m/2⌉` of `order` go to side A.
pub fn seed_split(m: usize, order: &[usize]) -> Vec<bool> {
    let mut in_a = vec![false; m];
    for &v in &order[..m.div_ceil(2)] {
        in_a[v] = true;
    }
    in_a
}

pub(crate) struct IndexBisection {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub cut: f64,
    pub passes: usize,
}

/// Bisects `members` (sorted global indices, at least 2).
pub(crate) fn bisect_indices(
    g: &AffinityGraph,
    members: &[usize],
    split: &SeedSplit,
    rng: Option<&mut ChaCha8Rng>,
) -> IndexBisection {
    let m = members.len();
    let costs = CostMatrix::for_subset(g, members);
    let identity: Vec<usize> = (0..m).collect();

    let mut best = refine(&costs, seed_split(m, &identity));
    let mut passes = best.passes.len();
    let mut best_cut = costs.cut(&best.in_a);

    if let (SeedSplit::RandomRestarts { restarts, .. }, Some(rng)) = (split, rng) {
        for _ in 0..*restarts {
            let mut order = identity.clone();
            order.shuffle(rng);
            let trace = refine(&costs, seed_split(m, &order));
            passes += trace.passes.len();
            let cut = costs.cut(&trace.in_a);
            if cut < best_cut {
                best_cut = cut;
                best = trace;
            }
        }
    }

    let (mut a, mut b) = (Vec::with_capacity(m.div_ceil(2)), Vec::with_capacity(m / 2));
    for (i, &v) in members.iter().enumerate() {
        if best.in_a[i] {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    IndexBisection {
        a,
        b,
        cut: best_cut,
        passes,
    }
}

/// A two-way split of a vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// `⌈m/2⌉` vertices, sorted.
    pub a: Vec<ServiceId>,
    /// `⌊m/2⌋` vertices, sorted.
    pub b: Vec<ServiceId>,
    pub cut_weight: f64,
    pub passes: usize,
}

/// KL bisection of `vertices` with the sorted seed split.
pub fn kl_bisect(
    g: &AffinityGraph,
    vertices: &[ServiceId],
) -> Result<(Vec<ServiceId>, Vec<ServiceId>), PartitionError> {
    let b = kl_bisect_with(g, vertices, &SeedSplit::Sorted)?;
    Ok((b.a, b.b))
}

pub fn kl_bisect_with(
    g: &AffinityGraph,
    vertices: &[ServiceId],
    split: &SeedSplit,
) -> Result<Bisection, PartitionError> {
    if vertices.len() < 2 {
        return Err(PartitionError::TooFewVertices(vertices.len()));
    }
    let mut members = vertices
        .iter()
        .map(|v| {
            g.index_of(v)
                .ok_or_else(|| PartitionError::UnknownVertex(v.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    members.sort_unstable();
    if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
        return Err(PartitionError::DuplicateVertex(g.vertices()[w[0]].clone()));
    }
    let mut rng = match split {
        SeedSplit::Sorted => None,
        SeedSplit::RandomRestarts { seed, .. } => {
            Some(<ChaCha8Rng as rand::SeedableRng>::seed_from_u64(*seed))
        }
    };
    let result = bisect_indices(g, &members, split, rng.as_mut());
    let names = |idx: Vec<usize>| -> Vec<ServiceId> {
        idx.into_iter().map(|i| g.vertices()[i].clone()).collect()
    };
    Ok(Bisection {
        a: names(result.a),
        b: names(result.b),
        cut_weight: result.cut,
        passes: result.passes,
    })
}
