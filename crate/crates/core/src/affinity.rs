//! Per-type service affinities and their weighted sum.
//!
//! Data and coupling affinity are traffic shares of the window (bytes and
//! messages respectively). Privacy, functional and operational affinity are
//! binary tag matches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MetaMap, MetricsWindow, ServiceId, ServiceMeta};

#[derive(Debug, Error, PartialEq)]
pub enum AffinityError {
    #[error("affinity of `{0}` with itself is undefined")]
    SameService(ServiceId),
    #[error("invalid affinity weights: {0}")]
    InvalidWeights(String),
}

/// Weight per affinity type. Defaults to 1.0 each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffinityWeights {
    pub data: f64,
    pub privacy: f64,
    pub coupling: f64,
    pub functional: f64,
    pub operational: f64,
}

impl Default for AffinityWeights {
    fn default() -> Self {
        AffinityWeights {
            data: 1.0,
            privacy: 1.0,
            coupling: 1.0,
            functional: 1.0,
            operational: 1.0,
        }
    }
}

impl AffinityWeights {
    pub fn new(
        data: f64,
        privacy: f64,
        coupling: f64,
        functional: f64,
        operational: f64,
    ) -> Result<Self, AffinityError> {
        let w = AffinityWeights {
            data,
            privacy,
            coupling,
            functional,
            operational,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), AffinityError> {
        let all = self.as_array();
        if let Some(bad) = all.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(AffinityError::InvalidWeights(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(AffinityError::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `[data, privacy, coupling, functional, operational]`
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.data,
            self.privacy,
            self.coupling,
            self.functional,
            self.operational,
        ]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        AffinityWeights {
            data: self.data * factor,
            privacy: self.privacy * factor,
            coupling: self.coupling * factor,
            functional: self.functional * factor,
            operational: self.operational * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityBreakdown {
    /// Data affinity, in [0, 1].
    pub d: f64,
    /// Privacy affinity, 0 or 1.
    pub p: f64,
    /// Coupling affinity, in [0, 1].
    pub c: f64,
    /// Functional affinity, 0 or 1.
    pub f: f64,
    /// Operational affinity, 0 or 1.
    pub o: f64,
    pub combined: f64,
}

impl AffinityBreakdown {
    /// Builds a breakdown from the five components and fills in `combined`.
    pub fn from_parts(d: f64, p: f64, c: f64, f: f64, o: f64, weights: &AffinityWeights) -> Self {
        let combined = weights.data * d
            + weights.privacy * p
            + weights.coupling * c
            + weights.functional * f
            + weights.operational * o;
        AffinityBreakdown {
            d,
            p,
            c,
            f,
            o,
            combined,
        }
    }
}

fn distinct(u: &ServiceId, v: &ServiceId) -> Result<(), AffinityError> {
    if u == v {
        Err(AffinityError::SameService(u.clone()))
    } else {
        Ok(())
    }
}

fn share(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        part as f64 / total as f64
    }
}

/// b_{u,v} / B, or 0 when the window carried no bytes.
pub fn data_affinity(
    u: &ServiceId,
    v: &ServiceId,
    win: &MetricsWindow,
) -> Result<f64, AffinityError> {
    distinct(u, v)?;
    Ok(share(win.bytes_between(u, v), win.total_bytes()))
}

/// m_{u,v} / M, or 0 when the window carried no messages.
pub fn coupling_affinity(
    u: &ServiceId,
    v: &ServiceId,
    win: &MetricsWindow,
) -> Result<f64, AffinityError> {
    distinct(u, v)?;
    Ok(share(win.messages_between(u, v), win.total_messages()))
}

fn tag_match(a: Option<&str>, b: Option<&str>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) if x == y => 1.0,
        _ => 0.0,
    }
}

pub fn privacy_affinity(u: &ServiceMeta, v: &ServiceMeta) -> f64 {
    tag_match(u.privacy_tag.as_deref(), v.privacy_tag.as_deref())
}

pub fn functional_affinity(u: &ServiceMeta, v: &ServiceMeta) -> f64 {
    tag_match(u.function_tag.as_deref(), v.function_tag.as_deref())
}

pub fn operational_affinity(u: &ServiceMeta, v: &ServiceMeta) -> f64 {
    tag_match(u.operational_tag.as_deref(), v.operational_tag.as_deref())
}

/// Weighted affinity of a pair. Services missing from `meta` count as fully
/// untagged.
pub fn combined_affinity(
    u: &ServiceId,
    v: &ServiceId,
    win: &MetricsWindow,
    meta: &MetaMap,
    weights: &AffinityWeights,
) -> Result<AffinityBreakdown, AffinityError> {
    let d = data_affinity(u, v, win)?;
    let c = coupling_affinity(u, v, win)?;
    let lookup = |id: &ServiceId| {
        meta.get(id)
            .cloned()
            .unwrap_or_else(|| ServiceMeta::untagged(id.clone()))
    };
    let (mu, mv) = (lookup(u), lookup(v));
    Ok(AffinityBreakdown::from_parts(
        d,
        privacy_affinity(&mu, &mv),
        c,
        functional_affinity(&mu, &mv),
        operational_affinity(&mu, &mv),
        weights,
    ))
}
