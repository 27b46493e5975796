use super::Graph;
use crate::error::{contract, Result};
use crate::numcore::Matrix;

/// Degree floor applied before inverting degrees of isolated nodes.
pub const DEGREE_FLOOR: f64 = 1e-8;

/// `D^{-1/2} A D^{-1/2}` with degrees floored at [`DEGREE_FLOOR`].
pub fn sym_normalize(g: &Graph) -> Result<Matrix> {
    if g.directed() {
        return contract("symmetric normalization needs an undirected graph");
    }
    let a = g.adjacency();
    let n = g.n();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum::<f64>().max(DEGREE_FLOOR).powf(-0.5)).collect();
    Ok(Matrix::from_fn(n, n, |i, j| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j]))
}

/// Receiver-oriented in-degree normalization: entry `(i, j)` weights the
/// message `j → i` and row `i` is divided by the in-degree of `i`.
pub fn in_deg_normalize(g: &Graph) -> Result<Matrix> {
    if !g.directed() {
        return contract("in-degree normalization needs a directed graph");
    }
    let a = g.adjacency();
    let n = g.n();
    let indeg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(j, i)]).sum::<f64>().max(DEGREE_FLOOR)).collect();
    Ok(Matrix::from_fn(n, n, |i, j| a[(j, i)] / indeg[i]))
}

/// `I − D^{-1/2} A D^{-1/2}`.
pub fn norm_laplacian(g: &Graph) -> Result<Matrix> {
    Matrix::identity(g.n()).sub(&sym_normalize(g)?)
}

/// `Σ_k θ_k M^k` by Horner's rule (`K` multiplications).
pub fn poly_filter(m: &Matrix, theta: &[f64]) -> Result<Matrix> {
    if !m.is_square() {
        return contract("polynomial filter needs a square matrix");
    }
    if theta.is_empty() {
        return contract("polynomial filter needs at least one coefficient");
    }
    let n = m.rows();
    let mut acc = Matrix::identity(n).scale(*theta.last().expect("non-empty"));
    for &c in theta.iter().rev().skip(1) {
        acc = acc.matmul(m)?.add(&Matrix::identity(n).scale(c))?;
    }
    Ok(acc)
}
