//! Parameter containers. Each exposes its tensors in one fixed order, which
//! is also the order in which the forward pass consumes their tape handles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdpError, Result};
use crate::numcore::{Tensor, Var};

fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape, data).expect("shape matches data").with_grad()
}

/// Hands out tape handles in registration order.
pub(crate) struct VarCursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl<'a> VarCursor<'a> {
    pub(crate) fn new(vars: &'a [Var]) -> Self {
        Self { vars, pos: 0 }
    }

    pub(crate) fn next(&mut self) -> Result<Var> {
        let v = self.vars.get(self.pos).copied().ok_or_else(|| GdpError::Contract("parameter handles exhausted".into()))?;
        self.pos += 1;
        Ok(v)
    }
}

/// `y = x W + b` with `W: in × out` and `b: 1 × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self { w: uniform(rng, vec![fan_in, fan_out], bound), b: uniform(rng, vec![1, fan_out], bound) }
    }

    pub fn zeroed(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Tensor::zeros(vec![fan_in, fan_out]).with_grad(), b: Tensor::zeros(vec![1, fan_out]).with_grad() }
    }

    pub(crate) fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Edge MLP `f_e(x_s, x_r) = W₂ act(W_s x_s + W_r x_r + b₁) + b₂` for one edge type.
///
/// The first layer is split into sender and receiver halves so it can be
/// applied per node rather than per pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMlp {
    pub sender: Tensor,
    pub receiver: Tensor,
    pub b1: Tensor,
    pub out: Linear,
}

impl EdgeMlp {
    pub fn init(rng: &mut ChaCha8Rng, d_in: usize, hidden: usize, d_msg: usize) -> Self {
        let bound = 1.0 / ((2 * d_in).max(1) as f64).sqrt();
        Self {
            sender: uniform(rng, vec![d_in, hidden], bound),
            receiver: uniform(rng, vec![d_in, hidden], bound),
            b1: uniform(rng, vec![1, hidden], bound),
            out: Linear::init(rng, hidden, d_msg),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub(crate) fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.sender, &self.receiver, &self.b1];
        v.extend(self.out.tensors());
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.sender, &mut self.receiver, &mut self.b1];
        v.extend(self.out.tensors_mut());
        v
    }
}

/// Which matrix weighs the messages of a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterSource {
    /// The edge probabilities `A^a` themselves.
    Adjacency,
    /// `g_θ(Ã^a)` of the normalized edge probabilities.
    Polynomial,
}

/// One surrogate: per-round edge MLP pairs (one per edge type) and a vertex MLP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBranch {
    pub source: FilterSource,
    /// `rounds[r][a]` is the edge MLP of edge type `a` in message-passing round `r`.
    pub rounds: Vec<[EdgeMlp; 2]>,
    pub vertex: Vec<Linear>,
}

impl SurrogateBranch {
    /// `d_in` node inputs (dynamic plus static channels), `d_out` predicted channels.
    pub fn init(rng: &mut ChaCha8Rng, source: FilterSource, d_in: usize, d_out: usize, hidden: usize, rounds: usize) -> Self {
        let mut edge = Vec::with_capacity(rounds);
        for r in 0..rounds.max(1) {
            let width = if r == 0 { d_in } else { hidden };
            edge.push([EdgeMlp::init(rng, width, hidden, hidden), EdgeMlp::init(rng, width, hidden, hidden)]);
        }
        let vertex = vec![Linear::init(rng, hidden, hidden), Linear::init(rng, hidden, hidden), Linear::init(rng, hidden, d_out)];
        Self { source, rounds: edge, vertex }
    }

    pub(crate) fn tensors(&self) -> Vec<&Tensor> {
        let mut v = Vec::new();
        for round in &self.rounds {
            for e in round {
                v.extend(e.tensors());
            }
        }
        for l in &self.vertex {
            v.extend(l.tensors());
        }
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for round in &mut self.rounds {
            for e in round.iter_mut() {
                v.extend(e.tensors_mut());
            }
        }
        for l in &mut self.vertex {
            v.extend(l.tensors_mut());
        }
        v
    }

    /// Exchanges the roles of the two edge types.
    pub fn swap_edge_types(&mut self) {
        for round in &mut self.rounds {
            round.swap(0, 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tensor_orders_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = SurrogateBranch::init(&mut rng, FilterSource::Polynomial, 3, 2, 5, 2);
        let shapes: Vec<Vec<usize>> = b.tensors().iter().map(|t| t.shape().to_vec()).collect();
        let shapes_mut: Vec<Vec<usize>> = b.tensors_mut().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, shapes_mut);
        // 2 rounds × 2 types × 5 tensors + 3 vertex layers × 2
        assert_eq!(shapes.len(), 26);
        assert_eq!(shapes[0], vec![3, 5]);
        assert_eq!(shapes[10], vec![5, 5]);
        assert!(b.tensors().iter().all(|t| t.requires_grad()));
    }
}
