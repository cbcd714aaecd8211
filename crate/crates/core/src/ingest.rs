//! Trace and metadata ingestion.
//!
//! Message traces come as JSON Lines (canonical) or CSV with the fixed header
//! `sender,receiver,bytes,count,timestamp`. [`aggregate`] folds the records of a
//! half-open window `[start, end)` into per-pair byte and message totals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = ["sender", "receiver", "bytes", "count", "timestamp"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    UnparseableLine { line: usize, reason: String },
    #[error("line {line}: sender and receiver are the same service")]
    SelfMessage { line: usize },
    #[error("line {line}: negative byte count")]
    NegativeBytes { line: usize },
    #[error("service id must be non-empty")]
    EmptyServiceId,
    #[error("invalid window [{start}, {end}): end must be greater than start")]
    InvalidWindow { start: u64, end: u64 },
    #[error("duplicate service `{0}` in metadata")]
    DuplicateService(ServiceId),
    #[error("metadata entry {0} has no `id`")]
    MissingId(usize),
    #[error("metadata entry {index}: {reason}")]
    InvalidMeta { index: usize, reason: String },
    #[error("malformed metadata document: {0}")]
    MalformedMeta(String),
    #[error("inconsistent metrics window: {0}")]
    InconsistentWindow(String),
    #[error("traffic totals overflow u64")]
    Overflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Name of a microservice. Ordering is lexicographic on the raw bytes and is
/// used for every deterministic tie-break downstream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ServiceId(String);

impl ServiceId {
    pub fn new(name: impl Into<String>) -> Result<Self, IngestError> {
        let name = name.into();
        if name.is_empty() {
            return Err(IngestError::EmptyServiceId);
        }
        Ok(ServiceId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ServiceId {
    type Error = IngestError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ServiceId::new(value)
    }
}

impl From<ServiceId> for String {
    fn from(id: ServiceId) -> Self {
        id.0
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ServiceId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ServiceId::new(s)
    }
}

/// Unordered pair of distinct services, stored low-then-high.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServicePair {
    low: ServiceId,
    high: ServiceId,
}

impl ServicePair {
    /// `None` when `u == v`.
    pub fn new(u: ServiceId, v: ServiceId) -> Option<Self> {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Some(ServicePair { low: u, high: v }),
            std::cmp::Ordering::Greater => Some(ServicePair { low: v, high: u }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn of(u: &ServiceId, v: &ServiceId) -> Option<Self> {
        ServicePair::new(u.clone(), v.clone())
    }

    pub fn low(&self) -> &ServiceId {
        &self.low
    }

    pub fn high(&self) -> &ServiceId {
        &self.high
    }
}

impl fmt::Display for ServicePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.low, self.high)
    }
}

/// One observed exchange. `bytes` is the total for the record, `count` the
/// number of messages it stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub sender: ServiceId,
    pub receiver: ServiceId,
    pub bytes: u64,
    pub count: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Jsonl,
    Csv,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(TraceFormat::Jsonl),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(format!(
                "unknown trace format `{other}` (expected jsonl or csv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedTrace {
    pub records: Vec<MessageRecord>,
    /// Lines dropped in lenient mode. Always 0 in strict mode.
    pub skipped: usize,
}

/// Parses a trace. In strict mode the first bad line aborts with its error; in
/// lenient mode bad lines are dropped and counted.
pub fn parse_trace<R: Read>(
    reader: R,
    format: TraceFormat,
    lenient: bool,
) -> Result<ParsedTrace, IngestError> {
    match format {
        TraceFormat::Jsonl => parse_jsonl(reader, lenient),
        TraceFormat::Csv => parse_csv(reader, lenient),
    }
}

fn keep_or_skip(
    out: &mut ParsedTrace,
    parsed: Result<MessageRecord, IngestError>,
    lenient: bool,
) -> Result<(), IngestError> {
    match parsed {
        Ok(record) => out.records.push(record),
        Err(IngestError::Io(e)) => return Err(IngestError::Io(e)),
        Err(_) if lenient => out.skipped += 1,
        Err(e) => return Err(e),
    }
    Ok(())
}

fn parse_jsonl<R: Read>(reader: R, lenient: bool) -> Result<ParsedTrace, IngestError> {
    let mut out = ParsedTrace::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        keep_or_skip(&mut out, parse_json_line(&line, idx + 1), lenient)?;
    }
    Ok(out)
}

fn parse_json_line(text: &str, line: usize) -> Result<MessageRecord, IngestError> {
    let bad = |reason: String| IngestError::UnparseableLine { line, reason };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| bad("expected a JSON object".into()))?;

    let name = |field: &str| -> Result<ServiceId, IngestError> {
        let s = obj
            .get(field)
            .and_then(|v| v.as_str())
            .ok_or_else(|| bad(format!("missing or non-string `{field}`")))?;
        ServiceId::new(s).map_err(|_| bad(format!("empty `{field}`")))
    };
    let sender = name("sender")?;
    let receiver = name("receiver")?;

    let bytes = match obj.get("bytes") {
        Some(serde_json::Value::Number(n)) => match (n.as_u64(), n.as_i64()) {
            (Some(b), _) => b,
            (None, Some(_)) => return Err(IngestError::NegativeBytes { line }),
            _ if n.as_f64().is_some_and(|f| f < 0.0) => {
                return Err(IngestError::NegativeBytes { line })
            }
            _ => return Err(bad("`bytes` must be an integer".into())),
        },
        _ => return Err(bad("missing or non-numeric `bytes`".into())),
    };
    let count = match obj.get("count") {
        None | Some(serde_json::Value::Null) => 1,
        Some(v) => v
            .as_u64()
            .filter(|&c| c >= 1)
            .ok_or_else(|| bad("`count` must be a positive integer".into()))?,
    };
    let timestamp = obj
        .get("timestamp")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| bad("missing or invalid `timestamp`".into()))?;

    finish_record(sender, receiver, bytes, count, timestamp, line)
}

fn finish_record(
    sender: ServiceId,
    receiver: ServiceId,
    bytes: u64,
    count: u64,
    timestamp: u64,
    line: usize,
) -> Result<MessageRecord, IngestError> {
    if sender == receiver {
        return Err(IngestError::SelfMessage { line });
    }
    Ok(MessageRecord {
        sender,
        receiver,
        bytes,
        count,
        timestamp,
    })
}

fn parse_csv<R: Read>(reader: R, lenient: bool) -> Result<ParsedTrace, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = ParsedTrace::default();
    let mut first = true;
    for row in rdr.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(IngestError::Io(std::io::Error::other(e.to_string())));
                }
                let err = IngestError::UnparseableLine {
                    line,
                    reason: e.to_string(),
                };
                keep_or_skip(&mut out, Err(err), lenient)?;
                continue;
            }
        };
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if first {
            first = false;
            if row.iter().eq(CSV_HEADER.iter().copied()) {
                continue;
            }
        }
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        keep_or_skip(&mut out, parse_csv_row(&row, line), lenient)?;
    }
    Ok(out)
}

fn parse_csv_row(row: &csv::StringRecord, line: usize) -> Result<MessageRecord, IngestError> {
    let bad = |reason: String| IngestError::UnparseableLine { line, reason };
    if row.len() != CSV_HEADER.len() {
        return Err(bad(format!("expected 5 fields, found {}", row.len())));
    }
    let sender = ServiceId::new(&row[0]).map_err(|_| bad("empty `sender`".into()))?;
    let receiver = ServiceId::new(&row[1]).map_err(|_| bad("empty `receiver`".into()))?;
    let bytes = match row[2].parse::<u64>() {
        Ok(b) => b,
        Err(_) if row[2].starts_with('-') && row[2][1..].parse::<u64>().is_ok() => {
            return Err(IngestError::NegativeBytes { line })
        }
        Err(_) => return Err(bad(format!("invalid `bytes` value `{}`", &row[2]))),
    };
    let count = if row[3].is_empty() {
        1
    } else {
        row[3]
            .parse::<u64>()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| bad(format!("invalid `count` value `{}`", &row[3])))?
    };
    let timestamp = row[4]
        .parse::<u64>()
        .map_err(|_| bad(format!("invalid `timestamp` value `{}`", &row[4])))?;
    finish_record(sender, receiver, bytes, count, timestamp, line)
}

/// Per-service tags. An absent tag never matches anything, including another
/// absent tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMeta {
    pub id: ServiceId,
    #[serde(rename = "privacy", default, skip_serializing_if = "Option::is_none")]
    pub privacy_tag: Option<String>,
    #[serde(rename = "function", default, skip_serializing_if = "Option::is_none")]
    pub function_tag: Option<String>,
    #[serde(
        rename = "operational",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub operational_tag: Option<String>,
}

impl ServiceMeta {
    pub fn untagged(id: ServiceId) -> Self {
        ServiceMeta {
            id,
            privacy_tag: None,
            function_tag: None,
            operational_tag: None,
        }
    }
}

pub type MetaMap = BTreeMap<ServiceId, ServiceMeta>;

/// Parses a metadata document: a JSON array of objects with a required `id`
/// and optional `privacy`, `function` and `operational` string tags.
pub fn parse_meta<R: Read>(reader: R) -> Result<MetaMap, IngestError> {
    let doc: serde_json::Value =
        serde_json::from_reader(reader).map_err(|e| IngestError::MalformedMeta(e.to_string()))?;
    let entries = doc
        .as_array()
        .ok_or_else(|| IngestError::MalformedMeta("expected a JSON array".into()))?;

    let mut out = MetaMap::new();
    for (index, entry) in entries.iter().enumerate() {
        let obj = entry.as_object().ok_or_else(|| IngestError::InvalidMeta {
            index,
            reason: "expected an object".into(),
        })?;
        let id = match obj.get("id").and_then(|v| v.as_str()) {
            Some(s) if !s.is_empty() => ServiceId(s.to_owned()),
            _ => return Err(IngestError::MissingId(index)),
        };
        let tag = |field: &str| -> Result<Option<String>, IngestError> {
            match obj.get(field) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(IngestError::InvalidMeta {
                    index,
                    reason: format!("`{field}` must be a string"),
                }),
            }
        };
        let meta = ServiceMeta {
            privacy_tag: tag("privacy")?,
            function_tag: tag("function")?,
            operational_tag: tag("operational")?,
            id: id.clone(),
        };
        if out.insert(id.clone(), meta).is_some() {
            return Err(IngestError::DuplicateService(id));
        }
    }
    Ok(out)
}

/// Traffic aggregates over `[window_start, window_end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowFile", into = "WindowFile")]
pub struct MetricsWindow {
    window_start: u64,
    window_end: u64,
    pair_bytes: BTreeMap<ServicePair, u64>,
    pair_messages: BTreeMap<ServicePair, u64>,
    total_bytes: u64,
    total_messages: u64,
    services: BTreeSet<ServiceId>,
    retained_records: usize,
}

/// Folds the records with `window_start <= timestamp < window_end` into a
/// window. Direction is discarded. Declared services with no traffic are kept
/// as isolated services. An empty window is still returned; check
/// [`MetricsWindow::is_empty_window`].
pub fn aggregate<'a, I>(
    records: I,
    window_start: u64,
    window_end: u64,
    declared_services: &BTreeSet<ServiceId>,
) -> Result<MetricsWindow, IngestError>
where
    I: IntoIterator<Item = &'a MessageRecord>,
{
    if window_end <= window_start {
        return Err(IngestError::InvalidWindow {
            start: window_start,
            end: window_end,
        });
    }
    let mut win = MetricsWindow {
        window_start,
        window_end,
        pair_bytes: BTreeMap::new(),
        pair_messages: BTreeMap::new(),
        total_bytes: 0,
        total_messages: 0,
        services: declared_services.clone(),
        retained_records: 0,
    };
    for rec in records {
        if rec.timestamp < window_start || rec.timestamp >= window_end {
            continue;
        }
        let Some(pair) = ServicePair::of(&rec.sender, &rec.receiver) else {
            continue;
        };
        let bytes = win.pair_bytes.entry(pair.clone()).or_insert(0);
        *bytes = bytes.checked_add(rec.bytes).ok_or(IngestError::Overflow)?;
        let msgs = win.pair_messages.entry(pair).or_insert(0);
        *msgs = msgs.checked_add(rec.count).ok_or(IngestError::Overflow)?;
        win.total_bytes = win
            .total_bytes
            .checked_add(rec.bytes)
            .ok_or(IngestError::Overflow)?;
        win.total_messages = win
            .total_messages
            .checked_add(rec.count)
            .ok_or(IngestError::Overflow)?;
        win.services.insert(rec.sender.clone());
        win.services.insert(rec.receiver.clone());
        win.retained_records += 1;
    }
    Ok(win)
}

impl MetricsWindow {
    pub fn window_start(&self) -> u64 {
        self.window_start
    }

    pub fn window_end(&self) -> u64 {
        self.window_end
    }

    /// b_{u,v}: 0 for pairs without traffic or with `u == v`.
    pub fn bytes_between(&self, u: &ServiceId, v: &ServiceId) -> u64 {
        ServicePair::of(u, v)
            .and_then(|p| self.pair_bytes.get(&p).copied())
            .unwrap_or(0)
    }

    /// m_{u,v}: 0 for pairs without traffic or with `u == v`.
    pub fn messages_between(&self, u: &ServiceId, v: &ServiceId) -> u64 {
        ServicePair::of(u, v)
            .and_then(|p| self.pair_messages.get(&p).copied())
            .unwrap_or(0)
    }

    pub fn pair_bytes(&self) -> &BTreeMap<ServicePair, u64> {
        &self.pair_bytes
    }

    pub fn pair_messages(&self) -> &BTreeMap<ServicePair, u64> {
        &self.pair_messages
    }

    /// Pairs with observed traffic, in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = &ServicePair> {
        self.pair_messages.keys()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn total_messages(&self) -> u64 {
        self.total_messages
    }

    pub fn services(&self) -> &BTreeSet<ServiceId> {
        &self.services
    }

    pub fn retained_records(&self) -> usize {
        self.retained_records
    }

    /// True when no record fell inside the window.
    pub fn is_empty_window(&self) -> bool {
        self.retained_records == 0
    }
}

/// On-disk form of [`MetricsWindow`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WindowFile {
    window_start: u64,
    window_end: u64,
    services: Vec<ServiceId>,
    pairs: Vec<PairTraffic>,
    total_bytes: u64,
    total_messages: u64,
    retained_records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairTraffic {
    u: ServiceId,
    v: ServiceId,
    bytes: u64,
    messages: u64,
}

impl From<MetricsWindow> for WindowFile {
    fn from(win: MetricsWindow) -> Self {
        let pairs = win
            .pair_messages
            .iter()
            .map(|(pair, &messages)| PairTraffic {
                u: pair.low.clone(),
                v: pair.high.clone(),
                bytes: win.pair_bytes.get(pair).copied().unwrap_or(0),
                messages,
            })
            .collect();
        WindowFile {
            window_start: win.window_start,
            window_end: win.window_end,
            services: win.services.into_iter().collect(),
            pairs,
            total_bytes: win.total_bytes,
            total_messages: win.total_messages,
            retained_records: win.retained_records,
        }
    }
}

impl TryFrom<WindowFile> for MetricsWindow {
    type Error = IngestError;

    fn try_from(file: WindowFile) -> Result<Self, Self::Error> {
        let bad = |msg: String| IngestError::InconsistentWindow(msg);
        if file.window_end <= file.window_start {
            return Err(IngestError::InvalidWindow {
                start: file.window_start,
                end: file.window_end,
            });
        }
        let services: BTreeSet<ServiceId> = file.services.into_iter().collect();
        let mut pair_bytes = BTreeMap::new();
        let mut pair_messages = BTreeMap::new();
        let (mut sum_bytes, mut sum_msgs) = (0u64, 0u64);
        for p in file.pairs {
            let pair = ServicePair::of(&p.u, &p.v)
                .ok_or_else(|| bad(format!("self pair on `{}`", p.u)))?;
            if !services.contains(&p.u) || !services.contains(&p.v) {
                return Err(bad(format!("pair {pair} references an undeclared service")));
            }
            if pair_messages.insert(pair.clone(), p.messages).is_some() {
                return Err(bad(format!("duplicate pair {pair}")));
            }
            pair_bytes.insert(pair, p.bytes);
            sum_bytes = sum_bytes
                .checked_add(p.bytes)
                .ok_or(IngestError::Overflow)?;
            sum_msgs = sum_msgs
                .checked_add(p.messages)
                .ok_or(IngestError::Overflow)?;
        }
        if sum_bytes != file.total_bytes || sum_msgs != file.total_messages {
            return Err(bad("totals do not match the per-pair sums".into()));
        }
        Ok(MetricsWindow {
            window_start: file.window_start,
            window_end: file.window_end,
            pair_bytes,
            pair_messages,
            total_bytes: file.total_bytes,
            total_messages: file.total_messages,
            services,
            retained_records: file.retained_records,
        })
    }
}
