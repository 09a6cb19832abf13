//! Run-log files: one CSV of evaluation records plus a JSON sidecar holding
//! the solver config, the final best value and base64 checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Algorithm, Record, RunLog, SolverCheckpoint, SolverConfig};
use crate::bbob::InstanceDescriptor;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "algorithm,function_id,instance_id,run_index,eval_index,generation,fitness";

#[derive(Serialize, Deserialize)]
struct CheckpointEntry {
    generation: usize,
    payload: String,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    v: u32,
    config_hash: String,
    run_index: u32,
    instance: InstanceDescriptor,
    config: SolverConfig,
    final_best: f64,
    total_evals: usize,
    records_persisted: usize,
    checkpoints: Vec<CheckpointEntry>,
}

/// Writes the first `max_records` records (all when `None`) of `log` to
/// `csv_path` and the sidecar to `json_path`.
pub fn write_run(
    log: &RunLog,
    csv_path: &Path,
    json_path: &Path,
    max_records: Option<usize>,
    config_hash: &str,
) -> Result<()> {
    let keep = max_records.unwrap_or(log.records.len()).min(log.records.len());
    let mut out = BufWriter::new(fs::File::create(csv_path)?);
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(out, "{CSV_HEADER}")?;
    let alg = log.config.algorithm;
    for r in &log.records[..keep] {
        writeln!(
            out,
            "{alg},{},{},{},{},{},{:?}",
            log.instance.function_id, log.instance.instance_id, log.run_index, r.eval_index, r.generation, r.fitness
        )?;
    }
    out.flush()?;

    let sidecar = Sidecar {
        v: SCHEMA_VERSION,
        config_hash: config_hash.to_string(),
        run_index: log.run_index,
        instance: log.instance,
        config: log.config.clone(),
        final_best: log.final_best,
        total_evals: log.records.first().map_or(0, |r| r.eval_index) + log.records.len(),
        records_persisted: keep,
        checkpoints: log
            .checkpoints
            .iter()
            .map(|(&generation, c)| CheckpointEntry { generation, payload: c.to_base64() })
            .collect(),
    };
    fs::write(json_path, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads the embedded config hash of a run CSV or sidecar without parsing
/// the rest of the file.
pub fn stored_hash(json_path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct Head {
        config_hash: String,
    }
    let head: Head = serde_json::from_slice(&fs::read(json_path)?)?;
    Ok(head.config_hash)
}

/// Loads a run log. The records are whatever prefix was persisted.
pub fn read_run(csv_path: &Path, json_path: &Path) -> Result<(RunLog, String)> {
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(json_path)?)?;
    if sidecar.v != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported run sidecar version {}", sidecar.v)));
    }
    let mut lines = BufReader::new(fs::File::open(csv_path)?).lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let csv_hash = first
        .strip_prefix("# config_hash=")
        .ok_or_else(|| Error::Format(format!("{} lacks a config hash line", csv_path.display())))?;
    if csv_hash != sidecar.config_hash {
        return Err(Error::StaleCache(format!(
            "{} and its sidecar carry different config hashes",
            csv_path.display()
        )));
    }
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected run CSV header {header:?}")));
    }
    let mut records = Vec::with_capacity(sidecar.records_persisted);
    for line in lines {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Format(format!("bad run CSV row {line:?}")));
        }
        let alg: Algorithm = cols[0].parse()?;
        if alg != sidecar.config.algorithm {
            return Err(Error::Format("algorithm column disagrees with sidecar".into()));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
        records.push(Record {
            eval_index: num(cols[4])?,
            generation: num(cols[5])?,
            fitness: cols[6].parse().map_err(|e| Error::Format(format!("{:?}: {e}", cols[6])))?,
        });
    }
    if records.len() != sidecar.records_persisted {
        return Err(Error::Format(format!(
            "{} holds {} records, sidecar expects {}",
            csv_path.display(),
            records.len(),
            sidecar.records_persisted
        )));
    }
    let mut checkpoints = BTreeMap::new();
    for entry in &sidecar.checkpoints {
        checkpoints.insert(entry.generation, SolverCheckpoint::from_base64(&entry.payload)?);
    }
    let log = RunLog {
        config: sidecar.config,
        instance: sidecar.instance,
        run_index: sidecar.run_index,
        records,
        checkpoints,
        final_best: sidecar.final_best,
    };
    Ok((log, sidecar.config_hash))
}
