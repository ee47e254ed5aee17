//! JSON reports with CSV sidecars for per-replica arrays.
//!
//! For a report written to `out/run.json`, the array `times` goes to
//! `out/run.times.csv` with columns `replica_id,seed,len,values`. `values`
//! is a space-separated list; an empty `len` marks a replica without that
//! array. A plot-ready ECDF overlay, when the experiment has one, goes to
//! `out/run.ecdf.csv`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::experiments::overlay;
use crate::report::{ExperimentReport, SCHEMA_VERSION};

/// Path of the sidecar holding array `name`.
pub fn sidecar_path(report_path: &Path, name: &str) -> PathBuf {
    let stem = report_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report_path.with_file_name(format!("{stem}.{name}.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display(), e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path.display(), e))
}

/// Writes the report and its sidecars. Returns every file written.
pub fn persist(report: &ExperimentReport, path: &Path) -> Result<Vec<PathBuf>> {
    let mut report = report.clone();
    report.sidecars = report.records.iter().flat_map(|r| r.arrays.keys().cloned()).collect();
    report.sidecars.sort();
    report.sidecars.dedup();

    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(|e| HarnessError::json(path.display(), e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| HarnessError::io(path.display(), e))?;
    let mut written = vec![path.to_path_buf()];

    for name in &report.sidecars {
        let p = sidecar_path(path, name);
        let mut csv = csv::Writer::from_writer(create(&p)?);
        let ctx = p.display().to_string();
        csv.write_record(["replica_id", "seed", "len", "values"]).map_err(|e| HarnessError::csv(&ctx, e))?;
        for r in &report.records {
            let (len, values) = match r.arrays.get(name) {
                Some(v) => (
                    v.len().to_string(),
                    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" "),
                ),
                None => (String::new(), String::new()),
            };
            csv.write_record([r.replica_id.to_string(), r.seed.to_string(), len, values])
                .map_err(|e| HarnessError::csv(&ctx, e))?;
        }
        csv.flush().map_err(|e| HarnessError::io(&ctx, e))?;
        written.push(p);
    }

    if let Some(o) = overlay(&report) {
        let p = sidecar_path(path, "ecdf");
        let ctx = p.display().to_string();
        let mut csv = csv::Writer::from_writer(create(&p)?);
        csv.write_record(["x", "empirical", o.label.as_str()]).map_err(|e| HarnessError::csv(&ctx, e))?;
        for i in 0..o.x.len() {
            csv.write_record([o.x[i], o.empirical[i], o.reference[i]].map(|v| format!("{v:?}")))
                .map_err(|e| HarnessError::csv(&ctx, e))?;
        }
        csv.flush().map_err(|e| HarnessError::io(&ctx, e))?;
        written.push(p);
    }
    Ok(written)
}

/// Reads a report written by [`persist`], sidecars included.
pub fn load(path: &Path) -> Result<ExperimentReport> {
    let file = File::open(path).map_err(|e| HarnessError::io(path.display(), e))?;
    let mut report: ExperimentReport =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| HarnessError::json(path.display(), e))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Format(format!(
            "{}: schema version {} but this tool reads {}",
            path.display(),
            report.schema_version,
            SCHEMA_VERSION
        )));
    }
    let index: BTreeMap<u64, usize> = report.records.iter().enumerate().map(|(i, r)| (r.replica_id, i)).collect();
    for name in report.sidecars.clone() {
        let p = sidecar_path(path, &name);
        let ctx = p.display().to_string();
        let mut rdr = csv::Reader::from_path(&p).map_err(|e| HarnessError::csv(&ctx, e))?;
        let mut rows = 0;
        for row in rdr.records() {
            let row = row.map_err(|e| HarnessError::csv(&ctx, e))?;
            let bad = |what: &str| HarnessError::Format(format!("{ctx}: {what} in row {}", rows + 1));
            let id: u64 = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad replica_id"))?;
            let &i = index.get(&id).ok_or_else(|| bad("unknown replica_id"))?;
            let len = row.get(2).ok_or_else(|| bad("missing len"))?;
            if !len.is_empty() {
                let len: usize = len.parse().map_err(|_| bad("bad len"))?;
                let values = row
                    .get(3)
                    .unwrap_or("")
                    .split_whitespace()
                    .map(str::parse::<f64>)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad value"))?;
                if values.len() != len {
                    return Err(bad("length mismatch"));
                }
                report.records[i].arrays.insert(name.clone(), values);
            }
            rows += 1;
        }
        if rows != report.records.len() {
            return Err(HarnessError::Format(format!(
                "{ctx}: {rows} rows for {} replicas",
                report.records.len()
            )));
        }
    }
    Ok(report)
}
