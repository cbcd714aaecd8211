//! The undirected affinity graph.
//!
//! Vertices are all services of a window in lexicographic order; edges exist
//! only between pairs that exchanged messages. Tag affinities change the weight
//! of an existing edge but never create one. Edge weights are the raw
//! affinities min-max normalized over the edge set; if every raw affinity is
//! equal each weight is 1.0.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{combined_affinity, AffinityBreakdown, AffinityError, AffinityWeights};
use crate::ingest::{MetaMap, MetricsWindow, ServiceId, ServicePair};
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(ServiceId),
    #[error("self-loop on `{0}`")]
    SelfLoop(ServiceId),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(ServiceId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(ServicePair),
    #[error("edge {pair}: {reason}")]
    InvalidWeight { pair: ServicePair, reason: String },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Affinity(#[from] AffinityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeData {
    #[serde(rename = "raw")]
    pub raw_affinity: f64,
    pub weight: f64,
    /// Absent for graphs built from explicit weights (synthetic or hand-made).
    pub breakdown: Option<AffinityBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct AffinityGraph {
    vertices: Vec<ServiceId>,
    index: HashMap<ServiceId, usize>,
    edges: BTreeMap<ServicePair, EdgeData>,
    adjacency: Vec<Vec<(usize, f64)>>,
    window: Option<(u64, u64)>,
}

/// Min-max normalization. All-equal input maps to all 1.0.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let Some(first) = raw.first() else {
        return Vec::new();
    };
    let (min, max) = raw
        .iter()
        .fold((*first, *first), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    if max == min {
        return vec![1.0; raw.len()];
    }
    let span = max - min;
    raw.iter().map(|&a| (a - min) / span).collect()
}

/// Builds the affinity graph of a window: one vertex per service, one edge per
/// pair with traffic, weighted by the normalized combined affinity.
pub fn build_graph(
    win: &MetricsWindow,
    meta: &MetaMap,
    weights: &AffinityWeights,
) -> Result<AffinityGraph, GraphError> {
    weights.validate()?;
    let mut pairs = Vec::new();
    let mut breakdowns = Vec::new();
    for pair in win.pairs() {
        let bd = combined_affinity(pair.low(), pair.high(), win, meta, weights)?;
        pairs.push(pair.clone());
        breakdowns.push(bd);
    }
    let raw: Vec<f64> = breakdowns.iter().map(|b| b.combined).collect();
    let normalized = normalize(&raw);
    let edges = pairs
        .into_iter()
        .zip(breakdowns)
        .zip(normalized)
        .map(|((pair, bd), weight)| {
            (
                pair,
                EdgeData {
                    raw_affinity: bd.combined,
                    weight,
                    breakdown: Some(bd),
                },
            )
        })
        .collect();
    let mut g = AffinityGraph::assemble(win.services().iter().cloned().collect(), edges)?;
    g.window = Some((win.window_start(), win.window_end()));
    Ok(g)
}

impl AffinityGraph {
    fn assemble(
        mut vertices: Vec<ServiceId>,
        edges: BTreeMap<ServicePair, EdgeData>,
    ) -> Result<Self, GraphError> {
        vertices.sort();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateVertex(w[0].clone()));
        }
        let index: HashMap<ServiceId, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (pair, data) in &edges {
            let lookup = |id: &ServiceId| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| GraphError::UnknownVertex(id.clone()))
            };
            let (i, j) = (lookup(pair.low())?, lookup(pair.high())?);
            let bad = |reason: &str| GraphError::InvalidWeight {
                pair: pair.clone(),
                reason: reason.to_owned(),
            };
            if !data.raw_affinity.is_finite() {
                return Err(bad("raw affinity is not finite"));
            }
            if !(0.0..=1.0).contains(&data.weight) {
                return Err(bad("weight outside [0, 1]"));
            }
            adjacency[i].push((j, data.weight));
            adjacency[j].push((i, data.weight));
        }
        Ok(AffinityGraph {
            vertices,
            index,
            edges,
            adjacency,
            window: None,
        })
    }

    fn collect_edges<I>(edges: I) -> Result<Vec<(ServicePair, f64)>, GraphError>
    where
        I: IntoIterator<Item = (ServiceId, ServiceId, f64)>,
    {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (u, v, value) in edges {
            let pair = ServicePair::new(u.clone(), v).ok_or(GraphError::SelfLoop(u))?;
            if !seen.insert(pair.clone()) {
                return Err(GraphError::DuplicateEdge(pair));
            }
            out.push((pair, value));
        }
        Ok(out)
    }

    /// Graph from raw affinities; weights are normalized as in [`build_graph`].
    pub fn from_raw_affinities<I>(vertices: Vec<ServiceId>, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (ServiceId, ServiceId, f64)>,
    {
        let edges = Self::collect_edges(edges)?;
        let raw: Vec<f64> = edges.iter().map(|(_, a)| *a).collect();
        let weights = normalize(&raw);
        let edges = edges
            .into_iter()
            .zip(weights)
            .map(|((pair, raw_affinity), weight)| {
                (
                    pair,
                    EdgeData {
                        raw_affinity,
                        weight,
                        breakdown: None,
                    },
                )
            })
            .collect();
        Self::assemble(vertices, edges)
    }

    /// Graph with explicit edge weights in [0, 1], used as given. The raw
    /// affinity of each edge is set to its weight.
    pub fn with_weights<I>(vertices: Vec<ServiceId>, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (ServiceId, ServiceId, f64)>,
    {
        let edges = Self::collect_edges(edges)?
            .into_iter()
            .map(|(pair, w)| {
                (
                    pair,
                    EdgeData {
                        raw_affinity: w,
                        weight: w,
                        breakdown: None,
                    },
                )
            })
            .collect();
        Self::assemble(vertices, edges)
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> &[ServiceId] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &BTreeMap<ServicePair, EdgeData> {
        &self.edges
    }

    pub fn edge(&self, u: &ServiceId, v: &ServiceId) -> Option<&EdgeData> {
        ServicePair::of(u, v).and_then(|p| self.edges.get(&p))
    }

    /// Source window bounds, when the graph was built from a window.
    pub fn window(&self) -> Option<(u64, u64)> {
        self.window
    }

    pub fn index_of(&self, id: &ServiceId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// `(neighbour index, weight)` pairs of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Normalized weight of `{u, v}`; 0 when the pair is not adjacent.
    pub fn edge_weight(&self, u: &ServiceId, v: &ServiceId) -> Result<f64, GraphError> {
        for id in [u, v] {
            if !self.index.contains_key(id) {
                return Err(GraphError::UnknownVertex(id.clone()));
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u.clone()));
        }
        Ok(self.edge(u, v).map_or(0.0, |e| e.weight))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().map(|e| e.weight).sum()
    }

    /// Block index per vertex; rejects partitions that are not a disjoint
    /// cover of the vertex set.
    pub fn membership(&self, p: &Partition) -> Result<Vec<usize>, GraphError> {
        let mut block = vec![usize::MAX; self.vertices.len()];
        for (b, subset) in p.subsets().iter().enumerate() {
            if subset.is_empty() {
                return Err(GraphError::InvalidPartition(format!("subset {b} is empty")));
            }
            for id in subset {
                let i = self.index_of(id).ok_or_else(|| {
                    GraphError::InvalidPartition(format!("`{id}` is not a vertex"))
                })?;
                if block[i] != usize::MAX {
                    return Err(GraphError::InvalidPartition(format!(
                        "`{id}` appears in more than one subset"
                    )));
                }
                block[i] = b;
            }
        }
        if let Some(i) = block.iter().position(|&b| b == usize::MAX) {
            return Err(GraphError::InvalidPartition(format!(
                "`{}` is not covered",
                self.vertices[i]
            )));
        }
        Ok(block)
    }

    /// Sum of the weights of edges whose endpoints lie in different subsets.
    pub fn total_cut_weight(&self, p: &Partition) -> Result<f64, GraphError> {
        Ok(self.split_weight(p)?.0)
    }

    /// Sum of the weights of edges inside a subset.
    pub fn internal_weight(&self, p: &Partition) -> Result<f64, GraphError> {
        Ok(self.split_weight(p)?.1)
    }

    fn split_weight(&self, p: &Partition) -> Result<(f64, f64), GraphError> {
        let block = self.membership(p)?;
        let (mut cut, mut internal) = (0.0, 0.0);
        for (pair, e) in &self.edges {
            let i = self.index[pair.low()];
            let j = self.index[pair.high()];
            if block[i] == block[j] {
                internal += e.weight;
            } else {
                cut += e.weight;
            }
        }
        Ok((cut, internal))
    }

    /// Graphviz rendering. With a partition, each subset becomes a cluster.
    pub fn to_dot(&self, partition: Option<&Partition>) -> String {
        let mut out = String::from("graph affinity {\n  node [shape=box];\n");
        match partition {
            Some(p) => {
                for (i, subset) in p.subsets().iter().enumerate() {
                    let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label=\"cluster {i}\";");
                    for v in subset {
                        let _ = writeln!(out, "    {};", dot_id(v.as_str()));
                    }
                    out.push_str("  }\n");
                }
            }
            None => {
                for v in &self.vertices {
                    let _ = writeln!(out, "  {};", dot_id(v.as_str()));
                }
            }
        }
        for (pair, e) in &self.edges {
            let _ = writeln!(
                out,
                "  {} -- {} [weight={}, label=\"{:.3}\", penwidth={:.2}];",
                dot_id(pair.low().as_str()),
                dot_id(pair.high().as_str()),
                e.weight,
                e.weight,
                0.5 + 3.0 * e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window_start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window_end: Option<u64>,
    vertices: Vec<ServiceId>,
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgeRecord {
    u: ServiceId,
    v: ServiceId,
    raw: f64,
    weight: f64,
    #[serde(default)]
    breakdown: Option<AffinityBreakdown>,
}

impl From<AffinityGraph> for GraphFile {
    fn from(g: AffinityGraph) -> Self {
        GraphFile {
            window_start: g.window.map(|w| w.0),
            window_end: g.window.map(|w| w.1),
            edges: g
                .edges
                .iter()
                .map(|(pair, e)| EdgeRecord {
                    u: pair.low().clone(),
                    v: pair.high().clone(),
                    raw: e.raw_affinity,
                    weight: e.weight,
                    breakdown: e.breakdown,
                })
                .collect(),
            vertices: g.vertices,
        }
    }
}

impl TryFrom<GraphFile> for AffinityGraph {
    type Error = GraphError;

    fn try_from(file: GraphFile) -> Result<Self, Self::Error> {
        let mut edges = BTreeMap::new();
        for e in file.edges {
            let pair = ServicePair::new(e.u.clone(), e.v).ok_or(GraphError::SelfLoop(e.u))?;
            let data = EdgeData {
                raw_affinity: e.raw,
                weight: e.weight,
                breakdown: e.breakdown,
            };
            if edges.insert(pair.clone(), data).is_some() {
                return Err(GraphError::DuplicateEdge(pair));
            }
        }
        let mut g = AffinityGraph::assemble(file.vertices, edges)?;
        g.window = file.window_start.zip(file.window_end);
        Ok(g)
    }
}
