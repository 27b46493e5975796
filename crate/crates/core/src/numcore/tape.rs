//! Reverse-mode differentiation over a linear record of tensor primitives.
//!
//! Values are stored on the tape; a [`Var`] is a handle into it. Leaves are
//! either constants or trainable parameters copied in from a [`Tensor`].
//! [`Tape::backward`] consumes the tape and returns the gradient of a scalar
//! with respect to every node that depends on a parameter.

use crate::error::{contract, GdpError, Result};
use crate::numcore::linalg::{gemm, gemm_nt, gemm_tn};
use crate::numcore::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearity used by the fused edge primitive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
}

impl std::str::FromStr for Activation {
    type Err = GdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(GdpError::Parse(format!("unknown activation `{other}` (relu, elu, tanh)"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
        })
    }
}

impl Activation {
    #[inline]
    fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Value and derivative at `z`.
    #[inline]
    fn eval_with_slope(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    let e = z.exp();
                    (e - 1.0, e)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

fn edge_forward(tape: &Tape, sender: Var, receiver: Var, weights: Var, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let (rows, h) = tape.d2(sender);
    let s = tape.value(sender);
    let r = tape.value(receiver);
    let w = tape.value(weights);
    let mut out = vec![0.0; rows * h];
    for b in 0..rows / n {
        for rr in 0..n {
            let ri = b * n + rr;
            let rrow = &r[ri * h..(ri + 1) * h];
            let orow = &mut out[ri * h..(ri + 1) * h];
            for ss in 0..n {
                let wv = w[rr * n + ss];
                if ss == rr || wv == 0.0 {
                    continue;
                }
                let si = b * n + ss;
                let srow = &s[si * h..(si + 1) * h];
                for ((o, sv), rv) in orow.iter_mut().zip(srow).zip(rrow) {
                    *o += wv * f(sv + rv);
                }
            }
        }
    }
    out
}

/// Gradients of [`Tape::edge_aggregate`] for sender, receiver and weights;
/// buffers not in `wants` stay empty.
fn edge_backward(
    tape: &Tape,
    g: &[f64],
    [sender, receiver, weights]: [Var; 3],
    n: usize,
    wants: [bool; 3],
    f: impl Fn(f64) -> (f64, f64),
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (rows, h) = tape.d2(sender);
    let s = tape.value(sender);
    let r = tape.value(receiver);
    let w = tape.value(weights);
    let mut ds = vec![0.0; if wants[0] { rows * h } else { 0 }];
    let mut dr = vec![0.0; if wants[1] { rows * h } else { 0 }];
    let mut dw = vec![0.0; if wants[2] { n * n } else { 0 }];
    let mut drow = vec![0.0; h];
    for b in 0..rows / n {
        for rr in 0..n {
            let ri = b * n + rr;
            let rrow = &r[ri * h..(ri + 1) * h];
            let grow = &g[ri * h..(ri + 1) * h];
            drow.iter_mut().for_each(|x| *x = 0.0);
            for ss in 0..n {
                if ss == rr {
                    continue;
                }
                let wv = w[rr * n + ss];
                let si = b * n + ss;
                let srow = &s[si * h..(si + 1) * h];
                // four partial sums let the loop vectorize
                let mut wacc = [0.0; 4];
                if wants[0] {
                    let dsrow = &mut ds[si * h..(si + 1) * h];
                    for (k, (((sv, rv), gv), (dsv, drv))) in
                        srow.iter().zip(rrow).zip(grow).zip(dsrow.iter_mut().zip(drow.iter_mut())).enumerate()
                    {
                        let (y, slope) = f(sv + rv);
                        wacc[k & 3] += gv * y;
                        let d = gv * wv * slope;
                        *dsv += d;
                        *drv += d;
                    }
                } else {
                    for (k, (((sv, rv), gv), drv)) in srow.iter().zip(rrow).zip(grow).zip(drow.iter_mut()).enumerate() {
                        let (y, slope) = f(sv + rv);
                        wacc[k & 3] += gv * y;
                        *drv += gv * wv * slope;
                    }
                }
                let wacc = (wacc[0] + wacc[1]) + (wacc[2] + wacc[3]);
                if wants[2] {
                    dw[rr * n + ss] += wacc;
                }
            }
            if wants[1] {
                dr[ri * h..(ri + 1) * h].iter_mut().zip(&drow).for_each(|(x, d)| *x += d);
            }
        }
    }
    (ds, dr, dw)
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScalarMul(Var, f64),
    ScaleBy(Var, Var),
    AddRowBias(Var, Var),
    Sum(Var),
    MeanSquaredError(Var, Var),
    Concat(Vec<Var>),
    Activate(Var, Activation),
    Sigmoid(Var),
    Softmax(Var, f64),
    Gather(Var, Vec<usize>),
    SumLastDim(Var),
    PowFloor(Var, f64, f64),
    Transpose(Var),
    EdgeAggregate { sender: Var, receiver: Var, weights: Var, nodes: usize, act: Activation },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dims2(shape: &[usize], len: usize) -> (usize, usize) {
    let cols = shape.last().copied().unwrap_or(1);
    if cols == 0 {
        (0, 0)
    } else {
        (len / cols, cols)
    }
}

fn dim_err<T>(op: &'static str, detail: String) -> Result<T> {
    Err(GdpError::Dimension { op, detail })
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, name: &str) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(GdpError::NonFinite { op: name.to_string() });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            op => inputs(op).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node { shape, value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant leaf.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant_raw(&mut self, shape: Vec<usize>, value: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, value)?;
        Ok(self.constant(&t))
    }

    /// Records a leaf; it participates in differentiation iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let v = self.constant(t);
        self.nodes[v.0].requires_grad = t.requires_grad();
        v
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].value.clone()).expect("node shape")
    }

    fn d2(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        dims2(&n.shape, n.value.len())
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa != sb {
            return dim_err(op, format!("{sa:?} vs {sb:?}"));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.d2(a);
        let (k2, n) = self.d2(b);
        if k != k2 {
            return dim_err("matmul", format!("{m}x{k} times {k2}x{n}"));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), self.value(b), &mut out, false);
        self.push(vec![m, n], out, Op::MatMul(a, b), "matmul")
    }

    /// One propagation step `M · X`.
    pub fn propagate(&mut self, m: Var, x: Var) -> Result<Var> {
        self.matmul(m, x)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(self.shape(a).to_vec(), out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        self.push(self.shape(a).to_vec(), out, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), "mul")
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).iter().map(|x| x * s).collect();
        self.push(self.shape(a).to_vec(), out, Op::ScalarMul(a, s), "scalar-mul")
    }

    /// `a` multiplied by the single value held in `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return dim_err("scale-by", format!("scale has {} values", self.value(s).len()));
        }
        let sv = self.value(s)[0];
        let out = self.value(a).iter().map(|x| x * sv).collect();
        self.push(self.shape(a).to_vec(), out, Op::ScaleBy(a, s), "scale-by")
    }

    /// Adds a length-`c` bias to every row of an `r×c` input.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, c) = self.d2(a);
        if self.value(bias).len() != c {
            return dim_err("add-row-bias", format!("bias of {} for {c} columns", self.value(bias).len()));
        }
        let b = self.value(bias);
        let out = self
            .value(a)
            .chunks(c.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        self.push(self.shape(a).to_vec(), out, Op::AddRowBias(a, bias), "add-row-bias")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(a), "sum-reduce")
    }

    /// Mean of squared differences over all elements.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mean-squared-error")?;
        let n = self.value(pred).len().max(1) as f64;
        let s: f64 = self
            .value(pred)
            .iter()
            .zip(self.value(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        self.push(vec![1], vec![s], Op::MeanSquaredError(pred, target), "mean-squared-error")
    }

    /// Concatenates along the last dimension; all inputs must share the row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return dim_err("concat-last-dim", "no inputs".into());
        }
        let rows = self.d2(parts[0]).0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = self.d2(*p);
            if r != rows {
                return dim_err("concat-last-dim", format!("row counts {rows} vs {r}"));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (p, w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(*p)[i * w..(i + 1) * w]);
            }
        }
        let mut shape = self.shape(parts[0]).to_vec();
        *shape.last_mut().expect("non-empty shape") = total;
        self.push(shape, out, Op::Concat(parts.to_vec()), "concat-last-dim")
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var> {
        let out = self.value(a).iter().map(|z| act.eval(*z)).collect();
        let name = match act {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
        };
        self.push(self.shape(a).to_vec(), out, Op::Activate(a, act), name)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Relu)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Tanh)
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Elu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect();
        self.push(self.shape(a).to_vec(), out, Op::Sigmoid(a), "sigmoid")
    }

    /// Row-wise `softmax(scale · a)` over the last dimension.
    pub fn softmax(&mut self, a: Var, scale: f64) -> Result<Var> {
        let (_, c) = self.d2(a);
        let mut out = Vec::with_capacity(self.value(a).len());
        for row in self.value(a).chunks(c.max(1)) {
            let m = row.iter().map(|z| scale * z).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|z| (scale * z - m).exp()).collect();
            let total: f64 = exps.iter().sum();
            out.extend(exps.iter().map(|e| e / total));
        }
        self.push(self.shape(a).to_vec(), out, Op::Softmax(a, scale), "softmax-over-last-dim")
    }

    /// `out[k] = a[index[k]]`, reshaped to `shape`.
    pub fn gather(&mut self, a: Var, index: Vec<usize>, shape: Vec<usize>) -> Result<Var> {
        let len = self.value(a).len();
        if shape.iter().product::<usize>() != index.len() {
            return dim_err("gather", format!("shape {shape:?} for {} indices", index.len()));
        }
        if let Some(bad) = index.iter().find(|i| **i >= len) {
            return dim_err("gather", format!("index {bad} out of range {len}"));
        }
        let src = self.value(a);
        let out = index.iter().map(|i| src[*i]).collect();
        self.push(shape, out, Op::Gather(a, index), "gather")
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let len = self.value(a).len();
        self.gather(a, (0..len).collect(), shape)
    }

    /// Sums each row, giving an `r×1` column.
    pub fn sum_last_dim(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.d2(a);
        let out = self.value(a).chunks(c.max(1)).map(|row| row.iter().sum()).collect();
        self.push(vec![r, 1], out, Op::SumLastDim(a), "sum-last-dim")
    }

    /// `max(a, floor)^power`, elementwise.
    pub fn pow_floor(&mut self, a: Var, power: f64, floor: f64) -> Result<Var> {
        let out = self.value(a).iter().map(|x| x.max(floor).powf(power)).collect();
        self.push(self.shape(a).to_vec(), out, Op::PowFloor(a, power, floor), "pow-floor")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.d2(a);
        let src = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        self.push(vec![c, r], out, Op::Transpose(a), "transpose")
    }

    /// Fused pairwise message aggregation.
    ///
    /// `sender` and `receiver` are `(batch·n)×h` per-node projections and
    /// `weights` is `n×n` indexed `[receiver, sender]`. Returns
    /// `out[b,r] = Σ_{s≠r} weights[r,s] · act(sender[b,s] + receiver[b,r])`.
    pub fn edge_aggregate(
        &mut self,
        sender: Var,
        receiver: Var,
        weights: Var,
        nodes: usize,
        act: Activation,
    ) -> Result<Var> {
        self.same_shape(sender, receiver, "edge-aggregate")?;
        let (rows, h) = self.d2(sender);
        if nodes == 0 || rows % nodes != 0 {
            return dim_err("edge-aggregate", format!("{rows} rows not a multiple of {nodes} nodes"));
        }
        if self.value(weights).len() != nodes * nodes {
            return dim_err("edge-aggregate", format!("weights have {} entries for n={nodes}", self.value(weights).len()));
        }
        let out = match act {
            Activation::Relu => edge_forward(self, sender, receiver, weights, nodes, |z| z.max(0.0)),
            Activation::Elu => edge_forward(self, sender, receiver, weights, nodes, |z| if z > 0.0 { z } else { z.exp_m1() }),
            Activation::Tanh => edge_forward(self, sender, receiver, weights, nodes, f64::tanh),
        };
        self.push(
            vec![rows, h],
            out,
            Op::EdgeAggregate { sender, receiver, weights, nodes, act },
            "edge-aggregate",
        )
    }

    /// Reverse pass from a scalar `loss`; consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let len = self.nodes[v.0].value.len();
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(buf);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.d2(*a);
                let (_, n) = self.d2(*b);
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &|buf| gemm_nt(m, n, k, g, bv, buf, true));
                acc(*b, &|buf| gemm_tn(k, m, n, av, g, buf, true));
            }
            Op::Add(a, b) => {
                acc(*a, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d));
            }
            Op::Sub(a, b) => {
                acc(*a, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x -= d));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &|buf| {
                    for ((x, d), o) in buf.iter_mut().zip(g).zip(bv) {
                        *x += d * o;
                    }
                });
                acc(*b, &|buf| {
                    for ((x, d), o) in buf.iter_mut().zip(g).zip(av) {
                        *x += d * o;
                    }
                });
            }
            Op::ScalarMul(a, s) => {
                acc(*a, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d * s));
            }
            Op::ScaleBy(a, s) => {
                let sv = self.value(*s)[0];
                let av = self.value(*a);
                acc(*a, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d * sv));
                acc(*s, &|buf| buf[0] += g.iter().zip(av).map(|(d, x)| d * x).sum::<f64>());
            }
            Op::AddRowBias(a, bias) => {
                let c = self.value(*bias).len();
                acc(*a, &|buf| buf.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*bias, &|buf| {
                    for row in g.chunks(c.max(1)) {
                        buf.iter_mut().zip(row).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::Sum(a) => {
                acc(*a, &|buf| buf.iter_mut().for_each(|x| *x += g[0]));
            }
            Op::MeanSquaredError(p, t) => {
                let (pv, tv) = (self.value(*p), self.value(*t));
                let scale = 2.0 * g[0] / pv.len().max(1) as f64;
                acc(*p, &|buf| {
                    for ((x, a), b) in buf.iter_mut().zip(pv).zip(tv) {
                        *x += scale * (a - b);
                    }
                });
                acc(*t, &|buf| {
                    for ((x, a), b) in buf.iter_mut().zip(pv).zip(tv) {
                        *x -= scale * (a - b);
                    }
                });
            }
            Op::Concat(parts) => {
                let widths: Vec<usize> = parts.iter().map(|p| self.d2(*p).1).collect();
                let total: usize = widths.iter().sum();
                let rows = node.value.len() / total.max(1);
                let mut offset = 0;
                for (p, w) in parts.iter().zip(&widths) {
                    let off = offset;
                    acc(*p, &|buf| {
                        for i in 0..rows {
                            for j in 0..*w {
                                buf[i * w + j] += g[i * total + off + j];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Activate(a, act) => {
                let av = self.value(*a);
                acc(*a, &|buf| {
                    for ((x, d), z) in buf.iter_mut().zip(g).zip(av) {
                        *x += d * act.eval_with_slope(*z).1;
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                acc(*a, &|buf| {
                    for ((x, d), s) in buf.iter_mut().zip(g).zip(y) {
                        *x += d * s * (1.0 - s);
                    }
                });
            }
            Op::Softmax(a, scale) => {
                let y = &node.value;
                let c = dims2(&node.shape, y.len()).1.max(1);
                acc(*a, &|buf| {
                    for ((brow, grow), yrow) in buf.chunks_mut(c).zip(g.chunks(c)).zip(y.chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(d, s)| d * s).sum();
                        for ((x, d), s) in brow.iter_mut().zip(grow).zip(yrow) {
                            *x += scale * s * (d - dot);
                        }
                    }
                });
            }
            Op::Gather(a, index) => {
                acc(*a, &|buf| {
                    for (d, i) in g.iter().zip(index) {
                        buf[*i] += d;
                    }
                });
            }
            Op::SumLastDim(a) => {
                let c = self.d2(*a).1.max(1);
                acc(*a, &|buf| {
                    for (row, d) in buf.chunks_mut(c).zip(g) {
                        row.iter_mut().for_each(|x| *x += d);
                    }
                });
            }
            Op::PowFloor(a, power, floor) => {
                let av = self.value(*a);
                acc(*a, &|buf| {
                    for ((x, d), v) in buf.iter_mut().zip(g).zip(av) {
                        if *v > *floor {
                            *x += d * power * v.powf(power - 1.0);
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let (r, c) = self.d2(*a);
                acc(*a, &|buf| {
                    for i in 0..r {
                        for j in 0..c {
                            buf[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::EdgeAggregate { sender, receiver, weights, nodes, act } => {
                let wants = [self.wants(*sender), self.wants(*receiver), self.wants(*weights)];
                let (ds, dr, dw) = match act {
                    Activation::Relu => edge_backward(self, g, [*sender, *receiver, *weights], *nodes, wants, |z| {
                        (z.max(0.0), if z > 0.0 { 1.0 } else { 0.0 })
                    }),
                    Activation::Elu => edge_backward(self, g, [*sender, *receiver, *weights], *nodes, wants, |z| {
                        if z > 0.0 {
                            (z, 1.0)
                        } else {
                            let e = z.exp();
                            (e - 1.0, e)
                        }
                    }),
                    Activation::Tanh => edge_backward(self, g, [*sender, *receiver, *weights], *nodes, wants, |z| {
                        let t = z.tanh();
                        (t, 1.0 - t * t)
                    }),
                };
                acc(*sender, &|buf| buf.iter_mut().zip(&ds).for_each(|(x, d)| *x += d));
                acc(*receiver, &|buf| buf.iter_mut().zip(&dr).for_each(|(x, d)| *x += d));
                acc(*weights, &|buf| buf.iter_mut().zip(&dw).for_each(|(x, d)| *x += d));
            }
        }
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::ScaleBy(a, b)
        | Op::AddRowBias(a, b)
        | Op::MeanSquaredError(a, b) => vec![*a, *b],
        Op::ScalarMul(a, _)
        | Op::Sum(a)
        | Op::Activate(a, _)
        | Op::Sigmoid(a)
        | Op::Softmax(a, _)
        | Op::Gather(a, _)
        | Op::SumLastDim(a)
        | Op::PowFloor(a, _, _)
        | Op::Transpose(a) => vec![*a],
        Op::Concat(parts) => parts.clone(),
        Op::EdgeAggregate { sender, receiver, weights, .. } => vec![*sender, *receiver, *weights],
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` does not influence the loss through a parameter.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `v` (zero if absent) into `target`'s buffer.
    pub fn accumulate_into(&self, v: Var, target: &mut Tensor) -> Result<()> {
        match self.get(v) {
            Some(g) => target.accumulate_grad(g),
            None => target.accumulate_grad(&vec![0.0; target.len()]),
        }
    }
}
