use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GdpError, Result};
use crate::numcore::Matrix;

/// Real-valued edge scores for every ordered node pair; the diagonal is ignored.
///
/// Entry `(i, j)` scores the edge `i → j` (or `{i, j}` when undirected).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    values: Matrix,
    directed: bool,
}

impl ScoreMatrix {
    pub fn new(values: Matrix, directed: bool) -> Result<Self> {
        if !values.is_square() {
            return Err(GdpError::Dimension {
                op: "score matrix",
                detail: format!("{}x{}", values.rows(), values.cols()),
            });
        }
        let n = values.rows();
        let mut values = values;
        for i in 0..n {
            if !values.row(i).iter().all(|v| v.is_finite()) {
                return Err(GdpError::NonFinite { op: "score matrix".into() });
            }
            values[(i, i)] = 0.0;
        }
        Ok(Self { values, directed })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.scale(-1.0), directed: self.directed }
    }

    /// Undirected scores `(s_ij + s_ji) / 2`.
    pub fn symmetrized(&self) -> Self {
        let m = &self.values;
        let values = Matrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Self { values, directed: false }
    }

    pub fn is_symmetric(&self) -> bool {
        self.values.is_symmetric(0.0)
    }

    /// Dense CSV, one row per line, diagonal written as 0.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:e}", self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, directed: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| GdpError::Parse(format!("score '{s}': {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GdpError::Parse("score CSV is not square".into()));
        }
        Self::new(Matrix::from_vec(n, n, rows.concat())?, directed)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path, directed: bool) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, directed)
    }
}
