//! Trajectory CSV files and the dataset manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization, SystemParams, Trajectory};
use crate::error::{GdpError, Result};
use crate::graphs::Graph;
use crate::numcore::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Volume {
    pub trajectories: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub states: String,
    #[serde(default)]
    pub static_features: Option<String>,
}

/// JSON description of a dataset directory. Paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub system: String,
    #[serde(default)]
    pub params: Option<SystemParams>,
    /// Sampling interval in native snapshots.
    pub dt: usize,
    /// Time between sampled snapshots.
    #[serde(default)]
    pub spacing: Option<f64>,
    pub volume: Volume,
    pub validation_trajectories: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub n: usize,
    pub directed: bool,
    /// Whether the trajectory files already hold normalized values.
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    pub ground_truth: Option<String>,
    pub train: Vec<TrajectoryFile>,
    pub valid: Vec<TrajectoryFile>,
    #[serde(default)]
    pub artifact_defaults: Vec<String>,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

impl Trajectory {
    /// CSV with header `t,node,dim0..dim{d-1}`, one row per snapshot and node.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string(), "node".to_string()];
        header.extend((0..self.dims()).map(|k| format!("dim{k}")));
        w.write_record(&header)?;
        for t in 0..self.steps() {
            for i in 0..self.n() {
                let mut row = vec![t.to_string(), i.to_string()];
                row.extend((0..self.dims()).map(|k| self.value(t, i, k).to_string()));
                w.write_record(&row)?;
            }
        }
        into_string(w)
    }

    /// Parses the trajectory CSV; rows may come in any order but must cover
    /// every `(t, node)` exactly once.
    pub fn from_csv(text: &str, static_features: Option<Matrix>, dt: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        let dims = header.len().saturating_sub(2);
        let expected: Vec<String> =
            ["t".to_string(), "node".to_string()].into_iter().chain((0..dims).map(|k| format!("dim{k}"))).collect();
        if dims == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(GdpError::Parse(format!("trajectory header must be t,node,dim0.. got '{}'", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let t: usize = parse_field(&rec, 0)?;
            let node: usize = parse_field(&rec, 1)?;
            let vals = (0..dims).map(|k| parse_field::<f64>(&rec, k + 2)).collect::<Result<Vec<_>>>()?;
            rows.push((t, node, vals));
        }
        let steps = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != steps * n {
            return Err(GdpError::Parse(format!("{} rows do not cover {steps} snapshots × {n} nodes", rows.len())));
        }
        let mut states = vec![f64::NAN; steps * n * dims];
        let mut seen = vec![false; steps * n];
        for (t, node, vals) in rows {
            let slot = t * n + node;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(GdpError::Parse(format!("duplicate row t={t} node={node}")));
            }
            states[slot * dims..(slot + 1) * dims].copy_from_slice(&vals);
        }
        Trajectory::new(steps, n, dims, states, static_features, dt)
    }
}

/// CSV with header `node,feat0..`, one row per node.
pub fn static_to_csv(m: &Matrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node".to_string()];
    header.extend((0..m.cols()).map(|k| format!("feat{k}")));
    w.write_record(&header)?;
    for i in 0..m.rows() {
        let mut row = vec![i.to_string()];
        row.extend(m.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    into_string(w)
}

pub fn static_from_csv(text: &str) -> Result<Matrix> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let cols = r.headers()?.len().saturating_sub(1);
    let mut data = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        let node: usize = parse_field(&rec, 0)?;
        if node != n {
            return Err(GdpError::Parse(format!("static rows out of order at node {node}")));
        }
        for k in 0..cols {
            data.push(parse_field::<f64>(&rec, k + 1)?);
        }
        n += 1;
    }
    Matrix::from_vec(n, cols, data)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(k).ok_or_else(|| GdpError::Parse(format!("missing column {k}")))?;
    raw.trim().parse().map_err(|e| GdpError::Parse(format!("column {k} value '{raw}': {e}")))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| GdpError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| GdpError::Parse(e.to_string()))
}

impl Dataset {
    /// Writes the edge list (when known), one CSV per trajectory and
    /// `manifest.json` under `dir`. Returns the manifest.
    pub fn write(&self, dir: &Path, config: Option<serde_json::Value>) -> Result<Manifest> {
        fs::create_dir_all(dir.join("train"))?;
        fs::create_dir_all(dir.join("valid"))?;
        let ground_truth = match &self.graph {
            Some(g) => {
                g.write_edge_list(&dir.join("graph.txt"))?;
                Some("graph.txt".to_string())
            }
            None => None,
        };
        let files = |split: &str, trajs: &[Trajectory]| -> Result<Vec<TrajectoryFile>> {
            trajs
                .iter()
                .enumerate()
                .map(|(k, tr)| {
                    let states = format!("{split}/{k:03}.csv");
                    fs::write(dir.join(&states), tr.to_csv()?)?;
                    let static_features = match tr.static_features() {
                        Some(s) => {
                            let name = format!("{split}/{k:03}_static.csv");
                            fs::write(dir.join(&name), static_to_csv(s)?)?;
                            Some(name)
                        }
                        None => None,
                    };
                    Ok(TrajectoryFile { states, static_features })
                })
                .collect()
        };
        let train = files("train", &self.train)?;
        let valid = files("valid", &self.valid)?;
        let (trajectories, steps) = self.volume();
        let manifest = Manifest {
            version: crate::VERSION.to_string(),
            system: self.system_tag().to_string(),
            params: self.params,
            dt: self.interval,
            spacing: Some(self.train[0].dt),
            volume: Volume { trajectories, steps },
            validation_trajectories: self.valid.len(),
            seed: self.seed,
            n: self.n(),
            directed: self.directed,
            normalized: true,
            normalization: Some(self.normalization.clone()),
            ground_truth,
            train,
            valid,
            artifact_defaults: self.params.map(|p| p.artifact_defaults()).unwrap_or_default(),
            config,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }

    /// Loads a dataset from its manifest. Files not marked `normalized` are
    /// mapped to `[−1, 1]` with the manifest's record, or with the training
    /// split's range when the manifest has none.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let root = manifest_path.parent().unwrap_or(Path::new("."));
        let dt = manifest.spacing.unwrap_or(manifest.dt as f64);
        let read = |files: &[TrajectoryFile]| -> Result<Vec<Trajectory>> {
            files
                .iter()
                .map(|f| {
                    let stat = match &f.static_features {
                        Some(p) => Some(static_from_csv(&fs::read_to_string(root.join(p))?)?),
                        None => None,
                    };
                    Trajectory::from_csv(&fs::read_to_string(root.join(&f.states))?, stat, dt)
                })
                .collect()
        };
        let mut train = read(&manifest.train)?;
        let mut valid = read(&manifest.valid)?;
        if train.is_empty() {
            return Err(GdpError::Parse("manifest lists no training trajectories".into()));
        }
        if train.iter().chain(&valid).any(|t| t.n() != manifest.n || t.dims() != train[0].dims()) {
            return Err(GdpError::Parse("trajectories disagree on node or channel count".into()));
        }
        let normalization = match (&manifest.normalization, manifest.normalized) {
            (Some(nz), true) => nz.clone(),
            (Some(nz), false) => {
                train = train.iter().map(|t| nz.apply(t)).collect::<Result<_>>()?;
                valid = valid.iter().map(|t| nz.apply(t)).collect::<Result<_>>()?;
                nz.clone()
            }
            (None, _) => {
                let nz = Normalization::fit(&train)?;
                train = train.iter().map(|t| nz.apply(t)).collect::<Result<_>>()?;
                valid = valid.iter().map(|t| nz.apply(t)).collect::<Result<_>>()?;
                nz
            }
        };
        let graph = match &manifest.ground_truth {
            Some(p) => {
                let g = Graph::read_edge_list(&root.join(p))?;
                if g.n() != manifest.n || g.directed() != manifest.directed {
                    return Err(GdpError::Parse("ground-truth graph disagrees with the manifest".into()));
                }
                Some(g)
            }
            None => None,
        };
        Ok(Dataset {
            params: manifest.params,
            graph,
            directed: manifest.directed,
            interval: manifest.dt,
            seed: manifest.seed,
            train,
            valid,
            normalization,
        })
    }
}
