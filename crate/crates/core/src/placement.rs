//! Cluster-to-node placement, migration planning and a traffic simulator.
//!
//! The simulator uses a two-level latency model: each message costs
//! `local_ms` when both endpoints share a node and `remote_ms` otherwise. The
//! estimated latency is the message-weighted mean of that per-hop cost.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AffinityGraph, GraphError};
use crate::ingest::{MetricsWindow, ServiceId};
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("partition has {subsets} subsets but {nodes} nodes were given")]
    NodeCountMismatch { subsets: usize, nodes: usize },
    #[error("placements cover different services: {0}")]
    ServiceSetMismatch(String),
    #[error("service `{0}` has no node")]
    UnassignedService(ServiceId),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid latency model: {0}")]
    InvalidLatencyModel(String),
    #[error("node id must be non-empty")]
    EmptyNodeId,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, PlacementError> {
        let name = name.into();
        if name.is_empty() {
            return Err(PlacementError::EmptyNodeId);
        }
        Ok(NodeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = PlacementError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> Self {
        id.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Service-to-node assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlacementFile", into = "PlacementFile")]
pub struct Placement {
    nodes: Vec<NodeId>,
    assignment: BTreeMap<ServiceId, NodeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlacementFile {
    nodes: Vec<NodeId>,
    assignment: BTreeMap<ServiceId, NodeId>,
}

impl From<Placement> for PlacementFile {
    fn from(p: Placement) -> Self {
        PlacementFile {
            nodes: p.nodes,
            assignment: p.assignment,
        }
    }
}

impl TryFrom<PlacementFile> for Placement {
    type Error = PlacementError;

    fn try_from(file: PlacementFile) -> Result<Self, Self::Error> {
        Placement::new(file.nodes, file.assignment)
    }
}

impl Placement {
    pub fn new(
        nodes: Vec<NodeId>,
        assignment: BTreeMap<ServiceId, NodeId>,
    ) -> Result<Self, PlacementError> {
        let known: BTreeSet<&NodeId> = nodes.iter().collect();
        if known.len() != nodes.len() {
            return Err(PlacementError::InvalidPlacement("duplicate node".into()));
        }
        if let Some((svc, node)) = assignment.iter().find(|(_, n)| !known.contains(n)) {
            return Err(PlacementError::InvalidPlacement(format!(
                "`{svc}` is assigned to unknown node `{node}`"
            )));
        }
        Ok(Placement { nodes, assignment })
    }

    /// Service `i` (in the given order) goes to `nodes[i % nodes.len()]`.
    pub fn round_robin(services: &[ServiceId], nodes: Vec<NodeId>) -> Result<Self, PlacementError> {
        if nodes.is_empty() {
            return Err(PlacementError::InvalidPlacement("no nodes".into()));
        }
        let assignment = services
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), nodes[i % nodes.len()].clone()))
            .collect();
        Placement::new(nodes, assignment)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn assignment(&self) -> &BTreeMap<ServiceId, NodeId> {
        &self.assignment
    }

    pub fn node_of(&self, service: &ServiceId) -> Option<&NodeId> {
        self.assignment.get(service)
    }

    /// Services grouped by node, restricted to `vertices`; empty nodes are
    /// dropped.
    pub fn induced_partition(&self, vertices: &[ServiceId]) -> Result<Partition, PlacementError> {
        let mut groups: BTreeMap<&NodeId, Vec<ServiceId>> = BTreeMap::new();
        for v in vertices {
            let node = self
                .node_of(v)
                .ok_or_else(|| PlacementError::UnassignedService(v.clone()))?;
            groups.entry(node).or_default().push(v.clone());
        }
        Ok(Partition::new(groups.into_values().collect()))
    }
}

/// Subset `i` of the partition goes to `nodes[i]`.
pub fn assign_clusters(p: &Partition, nodes: &[NodeId]) -> Result<Placement, PlacementError> {
    if nodes.len() != p.k() {
        return Err(PlacementError::NodeCountMismatch {
            subsets: p.k(),
            nodes: nodes.len(),
        });
    }
    let assignment = p
        .subsets()
        .iter()
        .zip(nodes)
        .flat_map(|(subset, node)| subset.iter().map(move |s| (s.clone(), node.clone())))
        .collect();
    Placement::new(nodes.to_vec(), assignment)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub service: ServiceId,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub moves: Vec<Move>,
    pub unchanged_count: usize,
    /// Node list of the target placement.
    pub target_nodes: Vec<NodeId>,
}

impl MigrationPlan {
    /// Applies the moves to `current`.
    pub fn apply(&self, current: &Placement) -> Result<Placement, PlacementError> {
        let mut assignment = current.assignment.clone();
        for m in &self.moves {
            match assignment.get_mut(&m.service) {
                Some(node) if *node == m.from => *node = m.to.clone(),
                Some(node) => {
                    return Err(PlacementError::InvalidPlacement(format!(
                        "`{}` is on `{node}`, plan expects `{}`",
                        m.service, m.from
                    )))
                }
                None => return Err(PlacementError::UnassignedService(m.service.clone())),
            }
        }
        Placement::new(self.target_nodes.clone(), assignment)
    }
}

/// Moves turning `current` into `target`, in service order.
pub fn plan_migration(
    current: &Placement,
    target: &Placement,
) -> Result<MigrationPlan, PlacementError> {
    let cur: BTreeSet<&ServiceId> = current.assignment.keys().collect();
    let tgt: BTreeSet<&ServiceId> = target.assignment.keys().collect();
    if cur != tgt {
        let only_cur: Vec<_> = cur.difference(&tgt).map(|s| s.as_str()).collect();
        let only_tgt: Vec<_> = tgt.difference(&cur).map(|s| s.as_str()).collect();
        return Err(PlacementError::ServiceSetMismatch(format!(
            "only in current: {only_cur:?}; only in target: {only_tgt:?}"
        )));
    }
    let mut moves = Vec::new();
    let mut unchanged_count = 0;
    for (service, from) in &current.assignment {
        let to = &target.assignment[service];
        if from == to {
            unchanged_count += 1;
        } else {
            moves.push(Move {
                service: service.clone(),
                from: from.clone(),
                to: to.clone(),
            });
        }
    }
    Ok(MigrationPlan {
        moves,
        unchanged_count,
        target_nodes: target.nodes.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub local_ms: f64,
    pub remote_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            local_ms: 0.5,
            remote_ms: 5.0,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), PlacementError> {
        let ok = self.local_ms.is_finite()
            && self.remote_ms.is_finite()
            && self.local_ms >= 0.0
            && self.remote_ms >= self.local_ms;
        if ok {
            Ok(())
        } else {
            Err(PlacementError::InvalidLatencyModel(format!(
                "need remote_ms >= local_ms >= 0, got local {} remote {}",
                self.local_ms, self.remote_ms
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    pub u: ServiceId,
    pub v: ServiceId,
    pub bytes: u64,
    pub messages: u64,
    pub local: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub inter_node_bytes: u64,
    pub intra_node_bytes: u64,
    pub cut_weight: f64,
    /// `None` when the window carried no messages.
    pub est_mean_latency_ms: Option<f64>,
    pub per_pair: Vec<PairReport>,
}

/// Replays the window's traffic on a placement.
pub fn simulate(
    pl: &Placement,
    win: &MetricsWindow,
    g: &AffinityGraph,
    model: &LatencyModel,
) -> Result<SimReport, PlacementError> {
    model.validate()?;
    if let Some(s) = win.services().iter().find(|s| pl.node_of(s).is_none()) {
        return Err(PlacementError::UnassignedService(s.clone()));
    }
    let (mut inter, mut intra) = (0u64, 0u64);
    let mut weighted_ms = 0.0;
    let mut per_pair = Vec::new();
    for (pair, &messages) in win.pair_messages() {
        let bytes = win.pair_bytes().get(pair).copied().unwrap_or(0);
        let local = pl.node_of(pair.low()) == pl.node_of(pair.high());
        if local {
            intra += bytes;
            weighted_ms += messages as f64 * model.local_ms;
        } else {
            inter += bytes;
            weighted_ms += messages as f64 * model.remote_ms;
        }
        per_pair.push(PairReport {
            u: pair.low().clone(),
            v: pair.high().clone(),
            bytes,
            messages,
            local,
        });
    }
    let total = win.total_messages();
    let est_mean_latency_ms = (total > 0).then(|| weighted_ms / total as f64);
    let partition = pl.induced_partition(g.vertices())?;
    Ok(SimReport {
        inter_node_bytes: inter,
        intra_node_bytes: intra,
        cut_weight: g.total_cut_weight(&partition)?,
        est_mean_latency_ms,
        per_pair,
    })
}

/// Percentage reductions from `before` to `after`; positive means better.
/// `None` where the `before` value is zero or undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub latency_delta_pct: Option<f64>,
    pub inter_bytes_delta_pct: Option<f64>,
    pub cut_delta_pct: Option<f64>,
}

pub fn reduction_pct(before: f64, after: f64) -> Option<f64> {
    (before != 0.0 && before.is_finite() && after.is_finite())
        .then(|| 100.0 * (before - after) / before)
}

pub fn compare(before: &SimReport, after: &SimReport) -> ImprovementReport {
    let latency_delta_pct = match (before.est_mean_latency_ms, after.est_mean_latency_ms) {
        (Some(b), Some(a)) => reduction_pct(b, a),
        _ => None,
    };
    ImprovementReport {
        latency_delta_pct,
        inter_bytes_delta_pct: reduction_pct(
            before.inter_node_bytes as f64,
            after.inter_node_bytes as f64,
        ),
        cut_delta_pct: reduction_pct(before.cut_weight, after.cut_weight),
    }
}

/// Before/after rows for plotting tools.
pub fn comparison_csv(before: &SimReport, after: &SimReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "label",
        "est_mean_latency_ms",
        "inter_node_bytes",
        "intra_node_bytes",
        "cut_weight",
    ];
    w.write_record(header).expect("in-memory write");
    for (label, r) in [("before", before), ("after", after)] {
        w.write_record([
            label.to_owned(),
            r.est_mean_latency_ms
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.inter_node_bytes.to_string(),
            r.intra_node_bytes.to_string(),
            r.cut_weight.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{aggregate, MessageRecord};

    fn sid(s: &str) -> ServiceId {
        ServiceId::new(s).unwrap()
    }

    fn nid(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    fn ids(names: &[&str]) -> Vec<ServiceId> {
        names.iter().map(|s| sid(s)).collect()
    }

    fn placement(nodes: &[&str], pairs: &[(&str, &str)]) -> Placement {
        Placement::new(
            nodes.iter().map(|n| nid(n)).collect(),
            pairs.iter().map(|(s, n)| (sid(s), nid(n))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn assign_by_index() {
        let p = Partition::new(vec![ids(&["a", "b"]), ids(&["c"])]);
        let pl = assign_clusters(&p, &[nid("n1"), nid("n2")]).unwrap();
        assert_eq!(
            pl,
            placement(&["n1", "n2"], &[("a", "n1"), ("b", "n1"), ("c", "n2")])
        );

        let one = Partition::new(vec![ids(&["a", "b", "c"])]);
        let pl = assign_clusters(&one, &[nid("solo")]).unwrap();
        assert!(pl.assignment().values().all(|n| n.as_str() == "solo"));

        let three = Partition::new(vec![ids(&["a"]), ids(&["b"]), ids(&["c"])]);
        assert_eq!(
            assign_clusters(&three, &[nid("n1"), nid("n2")]),
            Err(PlacementError::NodeCountMismatch {
                subsets: 3,
                nodes: 2
            })
        );
    }

    #[test]
    fn migration_plans() {
        let cur = placement(&["n1", "n2"], &[("a", "n1"), ("b", "n1"), ("c", "n2")]);
        let same = plan_migration(&cur, &cur).unwrap();
        assert!(same.moves.is_empty());
        assert_eq!(same.unchanged_count, 3);

        let tgt = placement(&["n1", "n2"], &[("a", "n1"), ("b", "n2"), ("c", "n2")]);
        let plan = plan_migration(&cur, &tgt).unwrap();
        assert_eq!(
            plan.moves,
            vec![Move {
                service: sid("b"),
                from: nid("n1"),
                to: nid("n2")
            }]
        );
        assert_eq!(plan.unchanged_count, 2);
        assert_eq!(plan.apply(&cur).unwrap(), tgt);

        let other = placement(&["n1"], &[("x", "n1")]);
        assert!(matches!(
            plan_migration(&cur, &other),
            Err(PlacementError::ServiceSetMismatch(_))
        ));
    }

    #[test]
    fn placement_validation() {
        let err = Placement::new(
            vec![nid("n1")],
            [(sid("a"), nid("n9"))].into_iter().collect(),
        );
        assert!(matches!(err, Err(PlacementError::InvalidPlacement(_))));
        let err = Placement::new(vec![nid("n1"), nid("n1")], BTreeMap::new());
        assert!(matches!(err, Err(PlacementError::InvalidPlacement(_))));
        assert!(
            serde_json::from_str::<Placement>(r#"{"nodes":["n1"],"assignment":{"a":"n2"}}"#)
                .is_err()
        );
    }

    fn abc_window() -> (MetricsWindow, AffinityGraph) {
        let rec = |s: &str, r: &str, bytes, count| MessageRecord {
            sender: sid(s),
            receiver: sid(r),
            bytes,
            count,
            timestamp: 0,
        };
        let win = aggregate(
            &[rec("a", "b", 300, 3), rec("b", "c", 100, 1)],
            0,
            1,
            &Default::default(),
        )
        .unwrap();
        let g = AffinityGraph::with_weights(
            ids(&["a", "b", "c"]),
            vec![(sid("a"), sid("b"), 1.0), (sid("b"), sid("c"), 0.0)],
        )
        .unwrap();
        (win, g)
    }

    #[test]
    fn simulate_examples() {
        let (win, g) = abc_window();
        let model = LatencyModel {
            local_ms: 1.0,
            remote_ms: 10.0,
        };

        let together = placement(&["n"], &[("a", "n"), ("b", "n"), ("c", "n")]);
        let r = simulate(&together, &win, &g, &model).unwrap();
        assert_eq!((r.inter_node_bytes, r.intra_node_bytes), (0, 400));
        assert_eq!(r.est_mean_latency_ms, Some(1.0));
        assert_eq!(r.cut_weight, 0.0);

        let apart = placement(&["x", "y", "z"], &[("a", "x"), ("b", "y"), ("c", "z")]);
        let r = simulate(&apart, &win, &g, &model).unwrap();
        assert_eq!((r.inter_node_bytes, r.intra_node_bytes), (400, 0));
        assert_eq!(r.est_mean_latency_ms, Some(10.0));

        // {a,b}: 3 local messages, {b,c}: 1 remote -> (3*1 + 1*10) / 4
        let split = placement(&["x", "y"], &[("a", "x"), ("b", "x"), ("c", "y")]);
        let r = simulate(&split, &win, &g, &model).unwrap();
        assert_eq!(r.est_mean_latency_ms, Some(3.25));
        assert_eq!(r.per_pair.iter().filter(|p| p.local).count(), 1);

        let partial = placement(&["x"], &[("a", "x"), ("b", "x")]);
        assert_eq!(
            simulate(&partial, &win, &g, &model),
            Err(PlacementError::UnassignedService(sid("c")))
        );
        let bad = LatencyModel {
            local_ms: 2.0,
            remote_ms: 1.0,
        };
        assert!(simulate(&split, &win, &g, &bad).is_err());
    }

    fn report(est: Option<f64>, inter: u64, cut: f64) -> SimReport {
        SimReport {
            inter_node_bytes: inter,
            intra_node_bytes: 0,
            cut_weight: cut,
            est_mean_latency_ms: est,
            per_pair: vec![],
        }
    }

    #[test]
    fn compare_percentages() {
        let before = report(Some(31.80), 100, 2.0);
        let after = report(Some(24.36), 25, 1.5);
        let imp = compare(&before, &after);
        assert!((imp.latency_delta_pct.unwrap() - 23.3962264150943).abs() < 1e-9);
        assert_eq!(imp.inter_bytes_delta_pct, Some(75.0));
        assert_eq!(imp.cut_delta_pct, Some(25.0));

        let same = compare(&before, &before);
        assert_eq!(same.latency_delta_pct, Some(0.0));

        let zero = compare(&report(Some(0.0), 0, 0.0), &after);
        assert_eq!(zero.latency_delta_pct, None);
        assert_eq!(zero.inter_bytes_delta_pct, None);
        assert_eq!(zero.cut_delta_pct, None);
        assert_eq!(
            compare(&report(None, 1, 1.0), &after).latency_delta_pct,
            None
        );
    }

    #[test]
    fn csv_has_two_rows() {
        let text = comparison_csv(&report(Some(2.0), 10, 1.0), &report(Some(1.0), 5, 0.5));
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("before,2,10"));
        assert!(lines[2].starts_with("after,1,5"));
    }
}
