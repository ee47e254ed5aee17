//! Report types, numeric payloads and the text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Bumped whenever the JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Version of this tool, echoed into every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Map of named finite values. Non-finite inputs are dropped so that every
/// stored number survives a JSON round trip.
pub type Scalars = BTreeMap<String, f64>;

pub(crate) fn put(map: &mut Scalars, key: impl Into<String>, v: f64) {
    if v.is_finite() {
        map.insert(key.into(), v);
    }
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Outcome of one replica. Bulk arrays live in CSV sidecars on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica_id: u64,
    /// Seed the replica ran with, see [`crate::experiments::derived_seed`].
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub scalars: Scalars,
    #[serde(skip)]
    pub arrays: BTreeMap<String, Vec<f64>>,
}

impl ReplicaRecord {
    pub fn new(replica_id: u64, seed: u64) -> Self {
        Self { replica_id, seed, error: None, scalars: Scalars::new(), arrays: BTreeMap::new() }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// Rejection level or acceptance bound the statistic was compared with.
    pub threshold: Option<f64>,
    pub pass: bool,
    /// Monitored verdicts are reported but do not decide the exit code.
    pub gated: bool,
}

impl Verdict {
    pub fn gated(name: &str, statistic: f64, p_value: Option<f64>, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            statistic: finite(statistic),
            p_value: p_value.and_then(finite),
            threshold: finite(threshold),
            pass,
            gated: true,
        }
    }

    pub fn monitored(self) -> Self {
        Self { gated: false, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub records: Vec<ReplicaRecord>,
    pub summary: Scalars,
    pub verdicts: Vec<Verdict>,
    pub failed_replicas: usize,
    /// Names of the per-replica arrays stored as sidecars.
    pub sidecars: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct PayloadRecord<'a> {
    replica_id: u64,
    seed: u64,
    error: &'a Option<String>,
    scalars: &'a Scalars,
    arrays: &'a BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize)]
struct Payload<'a> {
    schema_version: u32,
    config: ExperimentConfig,
    records: Vec<PayloadRecord<'a>>,
    summary: &'a Scalars,
    verdicts: &'a [Verdict],
    failed_replicas: usize,
}

impl ExperimentReport {
    /// A report with no replicas, statistics or verdicts.
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            versions: versions(),
            config,
            records: Vec::new(),
            summary: Scalars::new(),
            verdicts: Vec::new(),
            failed_replicas: 0,
            sidecars: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    /// All gated verdicts pass.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.gated).all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Scalar `key` of every successful replica, in replica order.
    pub fn column(&self, key: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.ok()).filter_map(|r| r.scalars.get(key).copied()).collect()
    }

    /// Canonical JSON of everything computed, without the wall time, the
    /// output path or the worker count.
    pub fn numeric_payload(&self) -> String {
        let mut config = self.config.clone();
        config.out = None;
        config.workers = None;
        let payload = Payload {
            schema_version: self.schema_version,
            config,
            records: self
                .records
                .iter()
                .map(|r| PayloadRecord {
                    replica_id: r.replica_id,
                    seed: r.seed,
                    error: &r.error,
                    scalars: &r.scalars,
                    arrays: &r.arrays,
                })
                .collect(),
            summary: &self.summary,
            verdicts: &self.verdicts,
            failed_replicas: self.failed_replicas,
        };
        serde_json::to_string(&payload).expect("payload contains only finite numbers and strings")
    }
}

pub(crate) fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("sao-core".to_string(), sao_core::VERSION.to_string()),
        ("sao-harness".to_string(), TOOL_VERSION.to_string()),
    ])
}

const HEADER: [&str; 5] = ["section", "name", "value", "p-value", "result"];

fn fmt_num(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(x) if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-3) => format!("{x:.4e}"),
        Some(x) => format!("{x:.6}"),
    }
}

/// Fixed-width table of summary statistics followed by verdicts.
///
/// An empty report yields just the header and its rule.
pub fn report_summary(report: &ExperimentReport) -> String {
    let mut rows: Vec<[String; 5]> = Vec::new();
    for (k, v) in &report.summary {
        rows.push(["stat".into(), k.clone(), fmt_num(Some(*v)), "-".into(), String::new()]);
    }
    for v in &report.verdicts {
        let result = match (v.pass, v.gated) {
            (true, true) => "PASS",
            (false, true) => "FAIL",
            (true, false) => "ok (monitored)",
            (false, false) => "off (monitored)",
        };
        rows.push(["test".into(), v.name.clone(), fmt_num(v.statistic), fmt_num(v.p_value), result.into()]);
    }
    let mut width = HEADER.map(str::len);
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 5]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            if i >= 2 && i <= 3 {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            } else {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            }
        }
        let _ = writeln!(out, "{}", s.trim_end());
    };
    line(&mut out, HEADER);
    let total: usize = width.iter().sum::<usize>() + 2 * (width.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for r in &rows {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3], &r[4]]);
    }
    out
}

/// Empirical CDF of a sample next to a reference CDF, ready for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfOverlay {
    pub label: String,
    pub x: Vec<f64>,
    pub empirical: Vec<f64>,
    pub reference: Vec<f64>,
}

impl EcdfOverlay {
    /// Evaluates both curves at the sorted sample points.
    pub fn new(label: &str, sample: &[f64], reference: impl Fn(f64) -> f64) -> Self {
        let mut x: Vec<f64> = sample.iter().copied().filter(|v| v.is_finite()).collect();
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let empirical = (1..=x.len()).map(|i| i as f64 / n).collect();
        let reference = x.iter().map(|&v| reference(v)).collect();
        Self { label: label.into(), x, empirical, reference }
    }
}
