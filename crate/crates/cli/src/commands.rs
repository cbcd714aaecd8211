//! One function per subcommand. Each reads its input files, runs a pipeline
//! stage and returns the value the binary writes out.

use std::collections::BTreeSet;
use std::path::Path;

use affinity_core::graph::build_graph;
use affinity_core::ingest::{aggregate, parse_meta, parse_trace, MetaMap};
use affinity_core::partition::{partition_k_with, PartitionReport};
use affinity_core::placement::{
    assign_clusters, compare, comparison_csv, plan_migration, simulate,
};
use affinity_core::{
    AffinityGraph, ImprovementReport, MetricsWindow, MigrationPlan, Partition, Placement,
    ServiceId, SimReport, TraceFormat,
};

use crate::config::Config;
use crate::error::CliError;
use crate::io::{open, read_json};

pub struct IngestOutcome {
    pub window: MetricsWindow,
    pub skipped: usize,
}

fn trace_format(path: &Path, config: &Config) -> TraceFormat {
    config
        .trace_format
        .unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::Jsonl,
        })
}

pub fn load_meta(path: Option<&Path>) -> Result<MetaMap, CliError> {
    match path {
        Some(p) => Ok(parse_meta(open(p)?)?),
        None => Ok(MetaMap::new()),
    }
}

/// Parses a trace (and optional metadata) and aggregates the configured
/// window. Without a configured window the window spans every record.
pub fn cmd_ingest(
    trace: &Path,
    meta: Option<&Path>,
    config: &Config,
) -> Result<IngestOutcome, CliError> {
    let parsed = parse_trace(open(trace)?, trace_format(trace, config), config.lenient)?;
    let meta = load_meta(meta.or(config.meta.as_deref()))?;
    let declared: BTreeSet<ServiceId> = meta.keys().cloned().collect();
    let (start, end) = match config.window {
        Some(w) => (w.start, w.end),
        None => {
            let ts = parsed.records.iter().map(|r| r.timestamp);
            match (ts.clone().min(), ts.max()) {
                (Some(lo), Some(hi)) => (lo, hi.saturating_add(1).max(lo + 1)),
                _ => (0, 1),
            }
        }
    };
    let window = aggregate(&parsed.records, start, end, &declared)?;
    Ok(IngestOutcome {
        window,
        skipped: parsed.skipped,
    })
}

pub fn cmd_graph(
    window: &Path,
    meta: Option<&Path>,
    config: &Config,
) -> Result<AffinityGraph, CliError> {
    let win: MetricsWindow = read_json(window)?;
    let meta = load_meta(meta.or(config.meta.as_deref()))?;
    Ok(build_graph(&win, &meta, &config.weights)?)
}

pub struct PartitionOutcome {
    pub graph: AffinityGraph,
    pub partition: Partition,
    pub report: PartitionReport,
    pub bisections: usize,
}

pub fn cmd_partition(graph: &Path, config: &Config) -> Result<PartitionOutcome, CliError> {
    let g: AffinityGraph = read_json(graph)?;
    let k = config.require_k()?;
    let outcome = partition_k_with(&g, k, &config.seed_split())?;
    let report = PartitionReport::new(&g, &outcome.partition)?;
    Ok(PartitionOutcome {
        graph: g,
        partition: outcome.partition,
        report,
        bisections: outcome.bisections,
    })
}

pub struct PlanOutcome {
    pub plan: MigrationPlan,
    pub target: Placement,
}

/// Maps the partition onto the configured nodes (or, failing that, the
/// current placement's nodes when there are exactly `k` of them) and diffs
/// against the current placement.
pub fn cmd_plan(
    partition: &Path,
    current: &Path,
    config: &Config,
) -> Result<PlanOutcome, CliError> {
    let report: PartitionReport = read_json(partition)?;
    let p = report.partition()?;
    let current: Placement = read_json(current)?;
    let nodes = if !config.nodes.is_empty() {
        config.nodes.clone()
    } else if current.nodes().len() == p.k() {
        current.nodes().to_vec()
    } else {
        return Err(CliError::Config(format!(
            "no node list configured and the current placement has {} nodes for {} subsets",
            current.nodes().len(),
            p.k()
        )));
    };
    let target = assign_clusters(&p, &nodes)?;
    let plan = plan_migration(&current, &target)?;
    Ok(PlanOutcome { plan, target })
}

pub fn cmd_simulate(
    placement: &Path,
    window: &Path,
    graph: &Path,
    config: &Config,
) -> Result<SimReport, CliError> {
    let pl: Placement = read_json(placement)?;
    let win: MetricsWindow = read_json(window)?;
    let g: AffinityGraph = read_json(graph)?;
    Ok(simulate(&pl, &win, &g, &config.latency_model)?)
}

pub struct CompareOutcome {
    pub improvement: ImprovementReport,
    pub csv: String,
}

pub fn cmd_compare(before: &Path, after: &Path) -> Result<CompareOutcome, CliError> {
    let b: SimReport = read_json(before)?;
    let a: SimReport = read_json(after)?;
    Ok(CompareOutcome {
        improvement: compare(&b, &a),
        csv: comparison_csv(&b, &a),
    })
}
