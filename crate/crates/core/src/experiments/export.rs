//! On-disk layout: `<dir>/<run-id>/{trace.csv, run.json, model.txt}` plus
//! `<dir>/summary.csv` and `<dir>/manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{median, std_dev, RunRecord, RunSpec, SampleLedger, TracePoint};
use crate::error::{Error, Result};
use crate::model::{read_checkpoint, write_checkpoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RunFile {
    schema_version: u32,
    software_version: String,
    experiment: String,
    spec: RunSpec,
    config: BTreeMap<String, String>,
    expected_quantum_per_iteration: u64,
    ledger: SampleLedger,
    wall_time_s: f64,
    final_kl: f64,
}

#[derive(Serialize, Deserialize)]
struct ManifestRun {
    run_id: String,
    group: String,
    seed: u64,
    wall_time_s: f64,
    config: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    software_version: String,
    execution: String,
    experiment: String,
    complete: bool,
    runs: Vec<ManifestRun>,
}

/// Final-KL statistics of one group of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub model: String,
    pub hidden: usize,
    pub trainer: String,
    pub shots: u64,
    pub runs: usize,
    pub median_final_kl: f64,
    pub std_final_kl: f64,
    pub mean_final_kl: f64,
    pub median_total_quantum_samples: f64,
}

/// Aggregate by group, in first-appearance order.
pub fn summarize(records: &[RunRecord]) -> Vec<GroupSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let g = r.spec.group.as_str();
        if !groups.contains_key(g) {
            order.push(g);
        }
        groups.entry(g).or_default().push(r);
    }
    order
        .into_iter()
        .map(|g| {
            let rs = &groups[g];
            let kls: Vec<f64> = rs.iter().map(|r| r.final_kl()).collect();
            let samples: Vec<f64> = rs.iter().map(|r| r.total_samples() as f64).collect();
            let first = &rs[0].spec;
            GroupSummary {
                group: g.to_string(),
                model: first.model.to_string(),
                hidden: first.hidden,
                trainer: first.trainer.to_string(),
                shots: first.shots,
                runs: rs.len(),
                median_final_kl: median(&kls),
                std_final_kl: std_dev(&kls),
                mean_final_kl: kls.iter().sum::<f64>() / kls.len() as f64,
                median_total_quantum_samples: median(&samples),
            }
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

pub fn write_trace(trace: &[TracePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for p in trace {
        w.serialize(p).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TracePoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn write_summary(summary: &[GroupSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in summary {
        w.serialize(s).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<GroupSummary>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Write every run plus the group summary and manifest under `dir`.
pub fn export_results(records: &[RunRecord], dir: &Path) -> Result<()> {
    write_results(records, dir, true)
}

/// Like [`export_results`], but marks the manifest incomplete.
pub fn export_partial(records: &[RunRecord], dir: &Path) -> Result<()> {
    write_results(records, dir, false)
}

fn write_results(records: &[RunRecord], dir: &Path, complete: bool) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Contract("nothing to export".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let version = env!("CARGO_PKG_VERSION").to_string();
    for r in records {
        let run_dir = dir.join(&r.spec.run_id);
        std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
        write_trace(&r.trace, &run_dir.join("trace.csv"))?;
        write_checkpoint(&r.final_params, &run_dir.join("model.txt"))?;
        let file = RunFile {
            schema_version: SCHEMA_VERSION,
            software_version: version.clone(),
            experiment: r.experiment.clone(),
            spec: r.spec.clone(),
            config: r.config.clone(),
            expected_quantum_per_iteration: r.expected_quantum_per_iteration,
            ledger: r.ledger.clone(),
            wall_time_s: r.wall_time_s,
            final_kl: r.final_kl(),
        };
        write_json(&file, &run_dir.join("run.json"))?;
    }
    write_summary(&summarize(records), &dir.join("summary.csv"))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        software_version: version,
        execution: crate::par::MODE.to_string(),
        experiment: records[0].experiment.clone(),
        complete,
        runs: records
            .iter()
            .map(|r| ManifestRun {
                run_id: r.spec.run_id.clone(),
                group: r.spec.group.clone(),
                seed: r.spec.seed,
                wall_time_s: r.wall_time_s,
                config: r.config.clone(),
            })
            .collect(),
    };
    write_json(&manifest, &dir.join("manifest.json"))
}

/// Read back the runs under `dir`, in manifest order when a manifest exists
/// and otherwise in directory-name order.
pub fn load_results(dir: &Path) -> Result<Vec<RunRecord>> {
    let manifest_path = dir.join("manifest.json");
    let ids: Vec<String> = if manifest_path.exists() {
        let m: Manifest = read_json(&manifest_path)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::parse("manifest", format!("unsupported schema version {}", m.schema_version)));
        }
        m.runs.into_iter().map(|r| r.run_id).collect()
    } else {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            if entry.path().join("run.json").exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        ids
    };
    if ids.is_empty() {
        return Err(Error::Contract(format!("no runs under {}", dir.display())));
    }
    ids.iter()
        .map(|id| {
            let run_dir = dir.join(id);
            let file: RunFile = read_json(&run_dir.join("run.json"))?;
            Ok(RunRecord {
                spec: file.spec,
                experiment: file.experiment,
                config: file.config,
                trace: read_trace(&run_dir.join("trace.csv"))?,
                ledger: file.ledger,
                expected_quantum_per_iteration: file.expected_quantum_per_iteration,
                final_params: read_checkpoint(&run_dir.join("model.txt"))?,
                wall_time_s: file.wall_time_s,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{run_train, ExperimentConfig};
    use super::*;

    fn record(seed: u64) -> RunRecord {
        let config = ExperimentConfig { iterations: 4, eval_every: 2, chains: 2, k: 1, seed, ..ExperimentConfig::default() };
        run_train(&config, None).unwrap()
    }

    #[test]
    fn empty_export_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_results(&[], dir.path()).is_err());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![record(3), record(4)];
        export_results(&records, dir.path()).unwrap();
        let back = load_results(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.final_params, b.final_params);
            assert_eq!(a.spec, b.spec);
            assert_eq!(a.ledger, b.ledger);
            assert_eq!(b.config["seed"], b.spec.seed.to_string());
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["runs"][0]["seed"], 3);
        assert_eq!(manifest["runs"][0]["config"]["seed"], "3");
        let summary = read_summary(&dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].runs, 2);
    }
}
