//! Pipeline configuration: one JSON file, every field overridable by a flag.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use affinity_core::{AffinityWeights, LatencyModel, NodeId, TraceFormat};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "SAGA_CONFIG";
pub const DEFAULT_RESTARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub weights: AffinityWeights,
    pub k: Option<usize>,
    /// Without a window every record is kept.
    pub window: Option<WindowConfig>,
    pub nodes: Vec<NodeId>,
    pub latency_model: LatencyModel,
    /// Enables random-restart seeding of each bisection.
    pub seed: Option<u64>,
    pub restarts: usize,
    pub trace_format: Option<TraceFormat>,
    pub lenient: bool,
    /// Metadata file used by `graph` when `--meta` is not given.
    pub meta: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            weights: AffinityWeights::default(),
            k: None,
            window: None,
            nodes: Vec::new(),
            latency_model: LatencyModel::default(),
            seed: None,
            restarts: DEFAULT_RESTARTS,
            trace_format: None,
            lenient: false,
            meta: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub weights: Option<AffinityWeights>,
    pub k: Option<usize>,
    pub window_start: Option<u64>,
    pub window_end: Option<u64>,
    pub nodes: Option<Vec<NodeId>>,
    pub local_ms: Option<f64>,
    pub remote_ms: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub trace_format: Option<TraceFormat>,
    pub lenient: bool,
    pub meta: Option<PathBuf>,
}

impl Config {
    /// Reads `path`, or `$SAGA_CONFIG` when no path is given, or falls back
    /// to defaults. Overrides are applied, then everything is validated.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut config = match path.map(Path::to_path_buf).or(env_path) {
            Some(p) => {
                let mut c = crate::io::read_json::<Config>(&p)?;
                // Relative paths in the file are relative to the file.
                if let (Some(meta), Some(dir)) = (&c.meta, p.parent()) {
                    if meta.is_relative() {
                        c.meta = Some(dir.join(meta));
                    }
                }
                c
            }
            None => Config::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.weights {
            self.weights = w;
        }
        if o.k.is_some() {
            self.k = o.k;
        }
        match (o.window_start, o.window_end, self.window) {
            (None, None, _) => {}
            (s, e, Some(w)) => {
                self.window = Some(WindowConfig {
                    start: s.unwrap_or(w.start),
                    end: e.unwrap_or(w.end),
                })
            }
            (s, e, None) => {
                self.window = Some(WindowConfig {
                    start: s.unwrap_or(0),
                    end: e.unwrap_or(u64::MAX),
                })
            }
        }
        if let Some(nodes) = &o.nodes {
            self.nodes = nodes.clone();
        }
        if let Some(ms) = o.local_ms {
            self.latency_model.local_ms = ms;
        }
        if let Some(ms) = o.remote_ms {
            self.latency_model.remote_ms = ms;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(r) = o.restarts {
            self.restarts = r;
        }
        if o.trace_format.is_some() {
            self.trace_format = o.trace_format;
        }
        self.lenient |= o.lenient;
        if o.meta.is_some() {
            self.meta = o.meta.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.weights
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.latency_model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(w) = self.window {
            if w.end <= w.start {
                return bad(format!(
                    "window end {} must exceed start {}",
                    w.end, w.start
                ));
            }
        }
        if self.k == Some(0) {
            return bad("k must be positive".into());
        }
        let unique: BTreeSet<&NodeId> = self.nodes.iter().collect();
        if unique.len() != self.nodes.len() {
            return bad("node names must be unique".into());
        }
        if let Some(k) = self.k {
            if !self.nodes.is_empty() && self.nodes.len() != k {
                return bad(format!("k = {k} but {} nodes are listed", self.nodes.len()));
            }
        }
        Ok(())
    }

    pub fn require_k(&self) -> Result<usize, CliError> {
        self.k
            .ok_or_else(|| CliError::Config("k is required (config `k` or --k)".into()))
    }

    pub fn seed_split(&self) -> affinity_core::partition::SeedSplit {
        match self.seed {
            Some(seed) => affinity_core::partition::SeedSplit::RandomRestarts {
                seed,
                restarts: self.restarts,
            },
            None => affinity_core::partition::SeedSplit::Sorted,
        }
    }
}
