//! Experiment runner for `sao-core`.
//!
//! An [`ExperimentConfig`] names one of the experiment kinds and its
//! parameters. [`run`] distributes replicas over a worker pool, each replica
//! seeded with a hash of the base seed xor its replica id, then aggregates
//! the ordered records into summary statistics and test verdicts. Everything except the wall time is
//! a pure function of the configuration.
//!
//! ```
//! use sao_harness::{run, ConfigPatch, ExperimentConfig, ExperimentKind};
//!
//! let patch = ConfigPatch { theta: Some(1.0), nu: Some(1.0), b: Some(1.0), replicas: Some(2), ..Default::default() };
//! let cfg = ExperimentConfig::from_patch(ExperimentKind::OuExit, patch).unwrap();
//! let report = run(&cfg).unwrap();
//! assert_eq!(report.records.len(), 2);
//! assert!(report.verdict("series_vs_mc").is_some());
//! ```

pub mod config;
pub mod error;
pub mod experiments;
pub mod persist;
pub mod report;
pub mod selftest;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{ConfigPatch, ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use persist::{load, persist};
pub use report::{report_summary, EcdfOverlay, ExperimentReport, ReplicaRecord, Verdict, SCHEMA_VERSION};

use experiments::Plan;

/// Runs an experiment; writes it to `config.out` when set.
///
/// Replica errors are kept in their records. The run itself fails when more
/// than 1% of the replicas fail.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let plan = Plan::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records: Vec<ReplicaRecord> =
        pool.install(|| (0..config.replicas as u64).into_par_iter().map(|id| plan.record(config, id)).collect());

    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed * 100 > config.replicas {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(HarnessError::TooManyFailures { failed, replicas: config.replicas, first });
    }

    let mut report = ExperimentReport::empty(config.clone());
    report.sidecars = records.iter().flat_map(|r| r.arrays.keys().cloned()).collect();
    report.sidecars.sort();
    report.sidecars.dedup();
    report.records = records;
    report.failed_replicas = failed;
    let (summary, verdicts) = plan.aggregate(config, &report)?;
    report.summary = summary;
    report.verdicts = verdicts;
    report.wall_time_s = started.elapsed().as_secs_f64();
    if let Some(out) = &config.out {
        persist(&report, out)?;
    }
    Ok(report)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
struct HarnessChapter;
