//! The two-branch learner: edge logits shared by an adjacency surrogate and a
//! polynomial-filter surrogate.

mod checkpoint;
mod forward;
mod params;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::graphs::Graph;
use crate::numcore::{Activation, Matrix, Tape, Tensor};
use crate::rng::stream;
use crate::scores::ScoreMatrix;

pub use checkpoint::Checkpoint;
pub use forward::{Batch, Transitions};
pub use params::{EdgeMlp, FilterSource, Linear, SurrogateBranch};
pub use train::{train, train_from, EpochRecord, History, TrainConfig, TrainedModel};

/// Inverse temperature of the edge-probability softmax.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub beta: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

/// Trainable logit pair `(Ψ⁰, Ψ¹)` per node pair, stored as a `pairs × 2` tensor.
///
/// Tied logits keep one pair per unordered node pair; untied logits keep one
/// per ordered pair `i → j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeLogits {
    n: usize,
    directed: bool,
    tied: bool,
    pub values: Tensor,
}

impl EdgeLogits {
    pub fn pair_count(n: usize, tied: bool) -> usize {
        if tied {
            n * (n - 1) / 2
        } else {
            n * (n - 1)
        }
    }

    /// Independent uniform draws in `[−0.1, 0.1]`.
    pub fn init(n: usize, directed: bool, tied: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        if directed && tied {
            return contract("directed targets cannot use tied logits");
        }
        if n < 2 {
            return contract("need at least two nodes");
        }
        let len = 2 * Self::pair_count(n, tied);
        let data = (0..len).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        Ok(Self { n, directed, tied, values: Tensor::new(vec![len / 2, 2], data)?.with_grad() })
    }

    /// Logits `(−m, +m)` on edges of `g` and `(+m, −m)` elsewhere.
    pub fn from_graph(g: &Graph, tied: bool, magnitude: f64) -> Result<Self> {
        let mut rng = rand::SeedableRng::seed_from_u64(0);
        let mut psi = Self::init(g.n(), g.directed(), tied, &mut rng)?;
        for i in 0..g.n() {
            for j in 0..g.n() {
                if i != j {
                    let sign = if g.has_edge(i, j) { 1.0 } else { -1.0 };
                    psi.set(i, j, -sign * magnitude, sign * magnitude);
                }
            }
        }
        Ok(psi)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn tied(&self) -> bool {
        self.tied
    }

    /// Row of the logit tensor that governs the edge `i → j`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n && j < self.n);
        if self.tied {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            // rows of the strict upper triangle, row-major
            a * (2 * self.n - a - 1) / 2 + (b - a - 1)
        } else {
            i * (self.n - 1) + if j < i { j } else { j - 1 }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let p = self.pair_index(i, j);
        (self.values.data()[2 * p], self.values.data()[2 * p + 1])
    }

    pub fn set(&mut self, i: usize, j: usize, psi0: f64, psi1: f64) {
        let p = self.pair_index(i, j);
        self.values.data_mut()[2 * p] = psi0;
        self.values.data_mut()[2 * p + 1] = psi1;
    }

    /// Exchanges `Ψ⁰` and `Ψ¹` everywhere.
    pub fn swap_channels(&mut self) {
        for pair in self.values.data_mut().chunks_mut(2) {
            pair.swap(0, 1);
        }
    }

    /// Flat indices into the logit tensor that lay channel `a` out as an
    /// `n × n` matrix indexed `[receiver, sender]`. Diagonal slots point at
    /// entry 0 and must be masked.
    pub(crate) fn receiver_layout(&self, a: usize) -> Vec<usize> {
        let n = self.n;
        let mut idx = Vec::with_capacity(n * n);
        for r in 0..n {
            for s in 0..n {
                idx.push(if r == s { 0 } else { 2 * self.pair_index(s, r) + a });
            }
        }
        idx
    }
}

/// Polynomial coefficients `θ₀ … θ_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCoeffs {
    pub theta: Tensor,
}

impl PolyCoeffs {
    /// The identity filter `θ₁ = 1`, all others 0.
    pub fn identity(k: usize) -> Result<Self> {
        if k < 1 {
            return contract("polynomial order K must be at least 1");
        }
        let mut theta = vec![0.0; k + 1];
        theta[1] = 1.0;
        Ok(Self { theta: Tensor::new(vec![k + 1], theta)?.with_grad() })
    }

    pub fn order(&self) -> usize {
        self.theta.len() - 1
    }
}

/// Sizes and switches fixed at construction time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub n: usize,
    pub directed: bool,
    pub tied: bool,
    pub state_dims: usize,
    pub static_dims: usize,
    pub hidden: usize,
    pub k: usize,
    pub rounds: usize,
    pub activation: Activation,
    pub generator: GeneratorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdpModel {
    pub shape: ModelShape,
    pub psi: EdgeLogits,
    pub poly: PolyCoeffs,
    pub adjacency: SurrogateBranch,
    pub polynomial: SurrogateBranch,
}

impl GdpModel {
    /// Random initialization from the `init` stream of `seed`.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        if !(shape.generator.beta > 0.0) {
            return contract("generator inverse temperature must be positive");
        }
        if shape.hidden == 0 || shape.state_dims == 0 {
            return contract("hidden width and state dimension must be positive");
        }
        let mut rng = stream(seed, "init");
        let psi = EdgeLogits::init(shape.n, shape.directed, shape.tied, &mut rng)?;
        let d_in = shape.state_dims + shape.static_dims;
        let adjacency =
            SurrogateBranch::init(&mut rng, FilterSource::Adjacency, d_in, shape.state_dims, shape.hidden, shape.rounds);
        let polynomial =
            SurrogateBranch::init(&mut rng, FilterSource::Polynomial, d_in, shape.state_dims, shape.hidden, shape.rounds);
        Ok(Self { shape, psi, poly: PolyCoeffs::identity(shape.k)?, adjacency, polynomial })
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn branch(&self, source: FilterSource) -> &SurrogateBranch {
        match source {
            FilterSource::Adjacency => &self.adjacency,
            FilterSource::Polynomial => &self.polynomial,
        }
    }

    /// Swaps `Ψ⁰ ↔ Ψ¹` and the per-type edge MLPs of both branches.
    pub fn swap_edge_types(&mut self) {
        self.psi.swap_channels();
        self.adjacency.swap_edge_types();
        self.polynomial.swap_edge_types();
    }
}

/// `A^a_{ij} = softmax(β [Ψ⁰_{ij}, Ψ¹_{ij}])_a`, indexed `[i, j]` for the
/// edge `i → j`, zero diagonal.
pub fn edge_probabilities(psi: &EdgeLogits, cfg: &GeneratorConfig) -> Result<(Matrix, Matrix)> {
    let mut tape = Tape::new();
    let v = tape.constant(&psi.values);
    let [w0, w1] = forward::message_weights(&mut tape, psi, v, cfg.beta)?;
    // message weights are [receiver, sender]
    Ok((tape.to_tensor(w0).to_matrix().transpose(), tape.to_tensor(w1).to_matrix().transpose()))
}

/// Message filters `(F⁰, F¹)` for a branch, indexed `[receiver, sender]`.
///
/// `a0`, `a1` are edge probabilities indexed `[i, j]` for `i → j`. The
/// polynomial source normalizes each with probabilistic degrees (in-degrees
/// when `directed`) and applies `g_θ`; the adjacency source returns the
/// probabilities unchanged.
pub fn branch_filters(a0: &Matrix, a1: &Matrix, theta: &[f64], source: FilterSource, directed: bool) -> Result<(Matrix, Matrix)> {
    if source == FilterSource::Adjacency {
        return Ok((a0.transpose(), a1.transpose()));
    }
    let mut tape = Tape::new();
    let th = tape.constant(&Tensor::new(vec![theta.len()], theta.to_vec())?);
    let mut out = Vec::with_capacity(2);
    for a in [a0, a1] {
        let w = tape.constant(&Tensor::from_matrix(&a.transpose()));
        let f = forward::poly_filter_on_tape(&mut tape, w, th, directed)?;
        out.push(tape.to_tensor(f).to_matrix());
    }
    let f1 = out.pop().expect("two filters");
    Ok((out.pop().expect("two filters"), f1))
}

/// One-step prediction `x + f_v(Σ_a Σ_{s≠r} F^a[r,s] f_e^a(x_s, x_r))` for an
/// `n × (d_s + d_f)` input whose first `d_s` columns are the dynamic channels.
pub fn surrogate_step(branch: &SurrogateBranch, f0: &Matrix, f1: &Matrix, x: &Matrix, act: Activation) -> Result<Matrix> {
    let n = x.rows();
    let d_out = branch.vertex.last().map_or(0, |l| l.b.len());
    let mut tape = Tape::new();
    let params: Vec<_> = branch.tensors().into_iter().map(|t| tape.constant(t)).collect();
    let w0 = tape.constant(&Tensor::from_matrix(f0));
    let w1 = tape.constant(&Tensor::from_matrix(f1));
    let xv = tape.constant(&Tensor::from_matrix(x));
    let dynamic = Matrix::from_fn(n, d_out, |i, k| x[(i, k)]);
    let xd = tape.constant(&Tensor::from_matrix(&dynamic));
    let mut cursor = params::VarCursor::new(&params);
    let pred = forward::branch_forward(&mut tape, branch, &mut cursor, [w0, w1], xv, xd, n, 1, act)?;
    Ok(tape.to_tensor(pred).to_matrix())
}

/// Sum of both surrogates' one-step MSE on `batch`.
pub fn gdp_loss(model: &GdpModel, batch: &Batch) -> Result<f64> {
    let mut tape = Tape::new();
    let plan = forward::LossPlan { adjacency: 1.0, polynomial: 1.0, train_graph: true };
    let (loss, _) = forward::loss_on_tape(&mut tape, model, batch, plan)?;
    Ok(tape.value(loss)[0])
}

/// Loss of both branches with its gradient for the edge logits and the
/// filter coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphGradients {
    pub loss: f64,
    /// Same layout as `EdgeLogits::values`.
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn graph_gradients(model: &GdpModel, batch: &Batch) -> Result<GraphGradients> {
    let mut tape = Tape::new();
    let plan = forward::LossPlan { adjacency: 1.0, polynomial: 1.0, train_graph: true };
    let (loss, reg) = forward::loss_on_tape(&mut tape, model, batch, plan)?;
    let value = tape.value(loss)[0];
    let grads = tape.backward(loss)?;
    let take = |v| grads.get(v).map(|g| g.to_vec()).unwrap_or_default();
    Ok(GraphGradients { loss: value, psi: take(reg.psi), theta: take(reg.theta) })
}

/// One-step MSE of a single surrogate branch.
pub fn branch_mse(model: &GdpModel, batch: &Batch, source: FilterSource) -> Result<f64> {
    let mut tape = Tape::new();
    let (adjacency, polynomial) = match source {
        FilterSource::Adjacency => (1.0, 0.0),
        FilterSource::Polynomial => (0.0, 1.0),
    };
    let plan = forward::LossPlan { adjacency, polynomial, train_graph: true };
    let (loss, _) = forward::loss_on_tape(&mut tape, model, batch, plan)?;
    Ok(tape.value(loss)[0])
}

/// Edge scores `A¹_{ij}`, symmetrized for undirected targets with untied logits.
pub fn predict_scores(model: &GdpModel) -> Result<ScoreMatrix> {
    let (_, a1) = edge_probabilities(&model.psi, &model.shape.generator)?;
    let scores = if !model.shape.directed && !model.psi.tied() {
        Matrix::from_fn(a1.rows(), a1.cols(), |i, j| 0.5 * (a1[(i, j)] + a1[(j, i)]))
    } else {
        a1
    };
    ScoreMatrix::new(scores, model.shape.directed)
}


#[cfg(test)]
mod tests_training;
