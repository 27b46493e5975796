//! Interaction graphs: generators, normalizations, polynomial filters and
//! effective-interaction-graph oracles.

mod effective;
mod generators;
mod normalize;
mod roots;
mod spec;

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, GdpError, Result};
use crate::numcore::Matrix;

pub use effective::{effective_graph, EffectiveGraphConfig, EffectiveMode};
pub use generators::{gen_ba, gen_er, gen_ws};
pub use normalize::{in_deg_normalize, norm_laplacian, poly_filter, sym_normalize, DEGREE_FLOOR};
pub use roots::{enumerate_poly_roots, real_roots, RootEnumeration, MAX_ALTERNATIVES};
pub use spec::GraphSpec;

/// Adjacency with a directedness flag. For directed graphs `A[i][j] = 1`
/// means the edge `i → j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Matrix,
    directed: bool,
    seed: Option<u64>,
}

/// Structural equality; the generation seed is metadata.
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.directed == other.directed && self.adjacency == other.adjacency
    }
}

impl Graph {
    pub fn empty(n: usize, directed: bool) -> Self {
        Self { adjacency: Matrix::zeros(n, n), directed, seed: None }
    }

    pub fn from_adjacency(adjacency: Matrix, directed: bool) -> Result<Self> {
        if !adjacency.is_square() {
            return contract("adjacency must be square");
        }
        let n = adjacency.rows();
        if (0..n).any(|i| adjacency[(i, i)] != 0.0) {
            return contract("adjacency must have a zero diagonal");
        }
        if !directed && !adjacency.is_symmetric(0.0) {
            return contract("undirected adjacency must be symmetric");
        }
        Ok(Self { adjacency, directed, seed: None })
    }

    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n, directed);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub(crate) fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.n();
        if i >= n || j >= n {
            return contract(format!("edge ({i}, {j}) out of range for n={n}"));
        }
        if i == j {
            return contract("self-loops are not allowed");
        }
        self.adjacency[(i, j)] = 1.0;
        if !self.directed {
            self.adjacency[(j, i)] = 1.0;
        }
        Ok(())
    }

    pub(crate) fn remove_edge(&mut self, i: usize, j: usize) {
        self.adjacency[(i, j)] = 0.0;
        if !self.directed {
            self.adjacency[(j, i)] = 0.0;
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    /// Unordered pairs `i < j` when undirected, ordered pairs otherwise.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.has_edge(i, j) && (self.directed || i < j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Nodes whose state feeds node `i`: neighbours when undirected, in-neighbours when directed.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| j != i && self.has_edge(j, i)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.in_neighbors(i).len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && (self.has_edge(u, v) || self.has_edge(v, u)) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Mean local clustering coefficient of the undirected skeleton.
    pub fn mean_clustering(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let linked = |a: usize, b: usize| self.has_edge(a, b) || self.has_edge(b, a);
        let total: f64 = (0..n)
            .map(|i| {
                let nb: Vec<usize> = (0..n).filter(|&j| j != i && linked(i, j)).collect();
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut tri = 0usize;
                for a in 0..k {
                    for b in (a + 1)..k {
                        if linked(nb[a], nb[b]) {
                            tri += 1;
                        }
                    }
                }
                2.0 * tri as f64 / (k * (k - 1)) as f64
            })
            .sum();
        total / n as f64
    }

    /// Off-diagonal entries flipped between edge and non-edge.
    pub fn complement(&self) -> Self {
        let n = self.n();
        let adjacency = Matrix::from_fn(n, n, |i, j| if i != j && !self.has_edge(i, j) { 1.0 } else { 0.0 });
        Self { adjacency, directed: self.directed, seed: self.seed }
    }

    /// Edge-list text: `n <count> directed <0|1>` then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {} directed {}\n", self.n(), u8::from(self.directed));
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| GdpError::Parse("empty edge list".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, directed) = match fields.as_slice() {
            ["n", n, "directed", d] => {
                let n = n.parse::<usize>().map_err(|e| GdpError::Parse(format!("node count: {e}")))?;
                let directed = match *d {
                    "0" => false,
                    "1" => true,
                    other => return Err(GdpError::Parse(format!("directed flag '{other}'"))),
                };
                (n, directed)
            }
            _ => return Err(GdpError::Parse(format!("bad edge-list header '{header}'"))),
        };
        let mut g = Self::empty(n, directed);
        for line in lines {
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => g.add_edge(i, j)?,
                _ => return Err(GdpError::Parse(format!("bad edge line '{line}'"))),
            }
        }
        Ok(g)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}
