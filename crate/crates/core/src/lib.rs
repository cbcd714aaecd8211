//! Service-affinity modelling and placement for microservice deployments.
//!
//! The pipeline runs in five stages, one module each:
//!
//! - [`ingest`]: parse message traces and service metadata, aggregate a time window.
//! - [`affinity`]: per-type affinities and their weighted combination.
//! - [`graph`]: the undirected affinity graph with min-max normalized edge weights.
//! - [`partition`]: k-way Kernighan-Lin partitioning plus an exhaustive oracle for small graphs.
//! - [`placement`]: cluster-to-node assignment, migration plans and a traffic/latency simulator.
//!
//! Every stage is a pure function of its inputs; identical inputs give identical outputs.

pub mod affinity;
pub mod graph;
pub mod ingest;
pub mod partition;
pub mod placement;

pub use affinity::{AffinityBreakdown, AffinityError, AffinityWeights};
pub use graph::{AffinityGraph, EdgeData, GraphError};
pub use ingest::{
    IngestError, MessageRecord, MetricsWindow, ServiceId, ServiceMeta, ServicePair, TraceFormat,
};
pub use partition::{Partition, PartitionError};
pub use placement::{
    ImprovementReport, LatencyModel, MigrationPlan, NodeId, Placement, PlacementError, SimReport,
};
