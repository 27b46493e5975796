use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Mean and population standard deviation of one metric in one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, count };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        Self { mean, std: var.sqrt(), count }
    }
}

/// Metrics of one (cell, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

/// One grid point aggregated over its seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub params: BTreeMap<String, String>,
    pub seeds: usize,
    pub metrics: BTreeMap<String, Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    /// Resolved run configuration.
    pub config: BTreeMap<String, String>,
    /// Protocol constants and derived flags.
    pub metadata: BTreeMap<String, Value>,
    pub cells: Vec<Cell>,
    pub records: Vec<Record>,
}

/// Builds a parameter map from `(key, value)` pairs.
pub fn params<K: ToString, V: ToString>(pairs: &[(K, V)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            version: crate::VERSION.to_string(),
            config: BTreeMap::new(),
            metadata: BTreeMap::new(),
            cells: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, params: BTreeMap<String, String>, seed: u64, metrics: &[(&str, f64)]) {
        let metrics = metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.records.push(Record { params, seed, metrics });
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    /// Groups records into cells in order of first appearance.
    pub fn finish(mut self) -> Self {
        let mut order: Vec<BTreeMap<String, String>> = Vec::new();
        for r in &self.records {
            if !order.contains(&r.params) {
                order.push(r.params.clone());
            }
        }
        self.cells = order
            .into_iter()
            .map(|p| {
                let rows: Vec<&Record> = self.records.iter().filter(|r| r.params == p).collect();
                let names: BTreeSet<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
                let metrics = names
                    .into_iter()
                    .map(|m| {
                        let vals: Vec<f64> = rows.iter().filter_map(|r| r.metrics.get(m).copied()).collect();
                        (m.clone(), Summary::of(&vals))
                    })
                    .collect();
                Cell { params: p, seeds: rows.len(), metrics }
            })
            .collect();
        self
    }

    /// Cell whose parameters include every given pair.
    pub fn cell(&self, pairs: &[(&str, &str)]) -> Option<&Cell> {
        self.cells.iter().find(|c| pairs.iter().all(|(k, v)| c.params.get(*k).map(String::as_str) == Some(*v)))
    }

    pub fn mean(&self, pairs: &[(&str, &str)], metric: &str) -> Option<f64> {
        self.cell(pairs)?.metrics.get(metric).map(|s| s.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per (cell, seed): parameter columns, `seed`, then metric columns.
    pub fn to_csv(&self) -> Result<String> {
        let pkeys: BTreeSet<&String> = self.records.iter().flat_map(|r| r.params.keys()).collect();
        let mkeys: BTreeSet<&String> = self.records.iter().flat_map(|r| r.metrics.keys()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["experiment".to_string()];
        header.extend(pkeys.iter().map(|k| k.to_string()));
        header.push("seed".into());
        header.extend(mkeys.iter().map(|k| k.to_string()));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![self.experiment.clone()];
            row.extend(pkeys.iter().map(|k| r.params.get(*k).cloned().unwrap_or_default()));
            row.push(r.seed.to_string());
            row.extend(mkeys.iter().map(|k| r.metrics.get(*k).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::GdpError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        Ok(())
    }
}
