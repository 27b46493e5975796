//! Forward pass on the tape: edge probabilities, filters, surrogates, loss.

use crate::dynamics::Trajectory;
use crate::error::{contract, Result};
use crate::numcore::{Activation, Matrix, Tape, Tensor, Var};

use super::params::{SurrogateBranch, VarCursor};
use super::{EdgeLogits, FilterSource, GdpModel};

/// Lower bound applied to probabilistic degrees before inverting them.
pub(crate) const DEGREE_FLOOR: f64 = 1e-8;

/// Receiver-oriented message weights `W^a[r, s] = P(s → r has type a)` with zero diagonal.
pub(crate) fn message_weights(tape: &mut Tape, psi: &EdgeLogits, logits: Var, beta: f64) -> Result<[Var; 2]> {
    let n = psi.n();
    let probs = tape.softmax(logits, beta)?;
    let mask = tape.constant(&Tensor::from_matrix(&off_diagonal(n)));
    let mut out = [probs; 2];
    for (a, slot) in out.iter_mut().enumerate() {
        let g = tape.gather(probs, psi.receiver_layout(a), vec![n, n])?;
        *slot = tape.mul(g, mask)?;
    }
    Ok(out)
}

fn off_diagonal(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })
}

/// `D^{-1/2} W D^{-1/2}` for undirected targets, `D_in^{-1} W` for directed ones.
pub(crate) fn normalized(tape: &mut Tape, w: Var, directed: bool) -> Result<Var> {
    let n = tape.shape(w)[0];
    let deg = tape.sum_last_dim(w)?;
    let outer = if directed {
        let dinv = tape.pow_floor(deg, -1.0, DEGREE_FLOOR)?;
        let ones = tape.constant_raw(vec![1, n], vec![1.0; n])?;
        tape.matmul(dinv, ones)?
    } else {
        let dinv = tape.pow_floor(deg, -0.5, DEGREE_FLOOR)?;
        let row = tape.transpose(dinv)?;
        tape.matmul(dinv, row)?
    };
    tape.mul(w, outer)
}

/// `g_θ(Ã) = Σ_k θ_k Ã^k` by Horner's rule.
pub(crate) fn poly_filter_on_tape(tape: &mut Tape, w: Var, theta: Var, directed: bool) -> Result<Var> {
    let n = tape.shape(w)[0];
    let k = tape.value(theta).len();
    if k < 2 {
        return contract("polynomial filter needs at least two coefficients");
    }
    let norm = normalized(tape, w, directed)?;
    let eye = tape.constant(&Tensor::from_matrix(&Matrix::identity(n)));
    let coeff = |tape: &mut Tape, i: usize| -> Result<Var> {
        let c = tape.gather(theta, vec![i], vec![1])?;
        tape.scale_by(eye, c)
    };
    let mut f = coeff(tape, k - 1)?;
    for i in (0..k - 1).rev() {
        let prod = tape.matmul(f, norm)?;
        let c = coeff(tape, i)?;
        f = tape.add(prod, c)?;
    }
    Ok(f)
}

fn linear(tape: &mut Tape, cursor: &mut VarCursor, x: Var) -> Result<Var> {
    let w = cursor.next()?;
    let b = cursor.next()?;
    let y = tape.matmul(x, w)?;
    tape.add_row_bias(y, b)
}

/// Surrogate prediction for `batch` stacked graphs of `n` nodes.
///
/// `x` holds every input channel, `dynamic` only the predicted ones. Filters
/// are `n × n`, indexed `[receiver, sender]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn branch_forward(
    tape: &mut Tape,
    branch: &SurrogateBranch,
    cursor: &mut VarCursor,
    filters: [Var; 2],
    x: Var,
    dynamic: Var,
    n: usize,
    batch: usize,
    act: Activation,
) -> Result<Var> {
    let mask = tape.constant(&Tensor::from_matrix(&off_diagonal(n)));
    let repeat: Vec<usize> = (0..batch).flat_map(|_| 0..n).collect();
    // Σ_{s≠r} F[r,s] per receiver, which multiplies the output bias
    let mut bias_weight = [mask; 2];
    for (a, slot) in bias_weight.iter_mut().enumerate() {
        let off = tape.mul(filters[a], mask)?;
        let c = tape.sum_last_dim(off)?;
        *slot = tape.gather(c, repeat.clone(), vec![batch * n, 1])?;
    }

    let mut h = x;
    for _ in &branch.rounds {
        let mut message: Option<Var> = None;
        for a in 0..2 {
            let ws = cursor.next()?;
            let wr = cursor.next()?;
            let b1 = cursor.next()?;
            let w2 = cursor.next()?;
            let b2 = cursor.next()?;
            let s = tape.matmul(h, ws)?;
            let r = tape.matmul(h, wr)?;
            let r = tape.add_row_bias(r, b1)?;
            let agg = tape.edge_aggregate(s, r, filters[a], n, act)?;
            let out = tape.matmul(agg, w2)?;
            let bias = tape.matmul(bias_weight[a], b2)?;
            let contrib = tape.add(out, bias)?;
            message = Some(match message {
                None => contrib,
                Some(m) => tape.add(m, contrib)?,
            });
        }
        h = message.expect("two edge types");
    }

    let layers = branch.vertex.len();
    for i in 0..layers {
        h = linear(tape, cursor, h)?;
        if i + 1 < layers {
            h = tape.activate(h, act)?;
        }
    }
    tape.add(dynamic, h)
}

/// One-step training pairs `(x_t, x_{t+1})` from a set of trajectories.
#[derive(Clone, Debug)]
pub struct Transitions {
    n: usize,
    state_dims: usize,
    input_dims: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

/// Stacked samples ready for the tape.
#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor,
    pub dynamic: Tensor,
    pub target: Tensor,
    pub samples: usize,
}

impl Transitions {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        let Some(first) = trajs.first() else {
            return contract("no trajectories to learn from");
        };
        let (n, d_s, d_f) = (first.n(), first.dims(), first.static_dims());
        let mut out = Self { n, state_dims: d_s, input_dims: d_s + d_f, inputs: Vec::new(), targets: Vec::new() };
        for tr in trajs {
            if tr.n() != n || tr.dims() != d_s || tr.static_dims() != d_f {
                return contract("trajectories disagree on node count or channels");
            }
            for t in 0..tr.steps() - 1 {
                let snap = tr.snapshot(t);
                let mut x = Vec::with_capacity(n * out.input_dims);
                for i in 0..n {
                    x.extend_from_slice(&snap[i * d_s..(i + 1) * d_s]);
                    if let Some(f) = tr.static_features() {
                        x.extend_from_slice(f.row(i));
                    }
                }
                out.inputs.push(x);
                out.targets.push(tr.snapshot(t + 1).to_vec());
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let (n, d_s, d_in) = (self.n, self.state_dims, self.input_dims);
        let rows = indices.len() * n;
        let mut x = Vec::with_capacity(rows * d_in);
        let mut dynamic = Vec::with_capacity(rows * d_s);
        let mut target = Vec::with_capacity(rows * d_s);
        for &k in indices {
            let input = &self.inputs[k];
            x.extend_from_slice(input);
            for i in 0..n {
                dynamic.extend_from_slice(&input[i * d_in..i * d_in + d_s]);
            }
            target.extend_from_slice(&self.targets[k]);
        }
        Ok(Batch {
            x: Tensor::new(vec![rows, d_in], x)?,
            dynamic: Tensor::new(vec![rows, d_s], dynamic)?,
            target: Tensor::new(vec![rows, d_s], target)?,
            samples: indices.len(),
        })
    }

    pub fn all(&self) -> Result<Batch> {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }
}

/// Which parts of the model take part in a loss evaluation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LossPlan {
    pub adjacency: f64,
    pub polynomial: f64,
    pub train_graph: bool,
}

/// Tape handles of the registered parameters.
pub(crate) struct Registered {
    pub psi: Var,
    pub theta: Var,
    pub adjacency: Vec<Var>,
    pub polynomial: Vec<Var>,
}

/// Builds the weighted loss; a branch with weight 0 is not recorded at all.
pub(crate) fn loss_on_tape(tape: &mut Tape, model: &GdpModel, batch: &Batch, plan: LossPlan) -> Result<(Var, Registered)> {
    let psi = if plan.train_graph { tape.leaf(&model.psi.values) } else { tape.constant(&model.psi.values) };
    let theta = tape.leaf(&model.poly.theta);
    let adjacency: Vec<Var> = model.adjacency.tensors().into_iter().map(|t| tape.leaf(t)).collect();
    let polynomial: Vec<Var> = model.polynomial.tensors().into_iter().map(|t| tape.leaf(t)).collect();
    let x = tape.constant(&batch.x);
    let dynamic = tape.constant(&batch.dynamic);
    let target = tape.constant(&batch.target);
    let (n, act, directed) = (model.n(), model.shape.activation, model.shape.directed);

    let weights = message_weights(tape, &model.psi, psi, model.shape.generator.beta)?;
    let mut total: Option<Var> = None;
    for (source, weight) in [(FilterSource::Adjacency, plan.adjacency), (FilterSource::Polynomial, plan.polynomial)] {
        if weight == 0.0 {
            continue;
        }
        let (branch, vars) = match source {
            FilterSource::Adjacency => (&model.adjacency, &adjacency),
            FilterSource::Polynomial => (&model.polynomial, &polynomial),
        };
        let filters = match source {
            FilterSource::Adjacency => weights,
            FilterSource::Polynomial => [
                poly_filter_on_tape(tape, weights[0], theta, directed)?,
                poly_filter_on_tape(tape, weights[1], theta, directed)?,
            ],
        };
        let mut cursor = VarCursor::new(vars);
        let pred = branch_forward(tape, branch, &mut cursor, filters, x, dynamic, n, batch.samples, act)?;
        let mse = tape.mse(pred, target)?;
        let term = if weight == 1.0 { mse } else { tape.scalar_mul(mse, weight)? };
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    let Some(loss) = total else {
        return contract("no active branch in the loss");
    };
    Ok((loss, Registered { psi, theta, adjacency, polynomial }))
}
