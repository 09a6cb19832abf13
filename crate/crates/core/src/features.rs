//! Named feature vectors and the CSV table format shared by time-series and
//! landscape features.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::Origin;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    /// NaN marks a feature that is undefined for this input.
    pub values: Vec<f64>,
    pub origin: Origin,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Rows of one feature catalog. Every row shares `names`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

const META: [&str; 3] = ["function_id", "instance_id", "run_index"];

impl FeatureTable {
    pub fn new(rows: Vec<FeatureVector>) -> Result<Self> {
        let names = rows.first().map(|r| r.names.clone()).unwrap_or_default();
        if rows.iter().any(|r| r.names != names || r.values.len() != names.len()) {
            return Err(invalid("feature rows disagree on the catalog"));
        }
        Ok(Self { names, rows })
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut file = fs::File::create(path)?;
        writeln!(file, "# config_hash={config_hash}")?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(META.iter().copied().chain(self.names.iter().map(String::as_str)))?;
        for r in &self.rows {
            let mut rec = vec![
                r.origin.function_id.to_string(),
                r.origin.instance_id.to_string(),
                r.origin.run_index.to_string(),
            ];
            rec.extend(r.values.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<(Self, String)> {
        let mut reader = BufReader::new(fs::File::open(path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let hash = first
            .trim_end()
            .strip_prefix("# config_hash=")
            .ok_or_else(|| Error::Format(format!("{} lacks a config hash line", path.display())))?
            .to_string();
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < META.len() || header.iter().take(META.len()).ne(META.iter().copied()) {
            return Err(Error::Format(format!("{}: unexpected header", path.display())));
        }
        let names: Vec<String> = header.iter().skip(META.len()).map(String::from).collect();
        let mut rows = Vec::new();
        let bad = |s: &str| Error::Format(format!("{}: bad field {s:?}", path.display()));
        for rec in r.records() {
            let rec = rec?;
            let int = |i: usize| rec[i].parse::<u32>().map_err(|_| bad(&rec[i]));
            let origin = Origin { function_id: int(0)?, instance_id: int(1)?, run_index: int(2)? };
            let values = rec
                .iter()
                .skip(META.len())
                .map(|s| s.parse::<f64>().map_err(|_| bad(s)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureVector { names: names.clone(), values, origin });
        }
        Ok((Self { names, rows }, hash))
    }
}
