//! Central finite-difference checks shared by the test targets.

#![allow(dead_code)]

use gdp_core::numcore::{Activation, Tape, Tensor, Var};
use gdp_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
const ABS_TOL: f64 = 1e-6;

pub fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).unwrap().with_grad()
}

/// Weighted sum of an output so every output element contributes a distinct gradient.
fn weighted_sum(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(out).to_vec();
    let len = tape.value(out).len();
    let w = tape.constant_raw(shape, (0..len).map(|_| rng.gen_range(0.5..1.5)).collect())?;
    let prod = tape.mul(out, w)?;
    tape.sum(prod)
}

/// Compares tape gradients of `build` against central differences; the
/// error names the first offending entry.
pub fn try_check<F>(name: &str, params: Vec<Tensor>, build: F) -> std::result::Result<(), String>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> (f64, Vec<Vec<f64>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p)).collect();
        let out = build(&mut tape, &vars).unwrap();
        let loss = weighted_sum(&mut tape, out, 99).unwrap();
        let value = tape.value(loss)[0];
        let grads = tape.backward(loss).unwrap();
        let gs = vars
            .iter()
            .zip(ps)
            .map(|(v, p)| grads.get(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
            .collect();
        (value, gs)
    };
    let (_, analytic) = eval(&params);
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.len() {
            let mut plus = params.clone();
            plus[pi].data_mut()[k] += H;
            let mut minus = params.clone();
            minus[pi].data_mut()[k] -= H;
            let numeric = (eval(&plus).0 - eval(&minus).0) / (2.0 * H);
            let a = analytic[pi][k];
            let err = (a - numeric).abs();
            if !(err <= ABS_TOL || err <= REL_TOL * numeric.abs().max(a.abs())) {
                return Err(format!("{name}: param {pi}[{k}] analytic {a} numeric {numeric}"));
            }
        }
    }
    Ok(())
}

pub fn check<F>(name: &str, params: Vec<Tensor>, build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if let Err(e) = try_check(name, params, build) {
        panic!("{e}");
    }
}

/// Every differentiable primitive on random inputs.
pub fn primitive_checks() -> Vec<(&'static str, std::result::Result<(), String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out = Vec::new();
    let a = random(vec![3, 4], &mut rng);
    let b = random(vec![4, 2], &mut rng);
    let c = random(vec![3, 4], &mut rng);
    out.push(("matmul", try_check("matmul", vec![a.clone(), b], |t, v| t.matmul(v[0], v[1]))));
    out.push((
        "propagate",
        try_check("propagate", vec![random(vec![3, 3], &mut rng), random(vec![3, 2], &mut rng)], |t, v| t.propagate(v[0], v[1])),
    ));
    out.push(("add", try_check("add", vec![a.clone(), c.clone()], |t, v| t.add(v[0], v[1]))));
    out.push(("sub", try_check("sub", vec![a.clone(), c.clone()], |t, v| t.sub(v[0], v[1]))));
    out.push(("mul", try_check("mul", vec![a.clone(), c], |t, v| t.mul(v[0], v[1]))));
    out.push(("mul-self", try_check("mul-self", vec![a], |t, v| t.mul(v[0], v[0]))));

    let a = random(vec![2, 3], &mut rng);
    out.push(("scalar-mul", try_check("scalar-mul", vec![a.clone()], |t, v| t.scalar_mul(v[0], -1.7))));
    out.push(("scale-by", try_check("scale-by", vec![a.clone(), random(vec![1], &mut rng)], |t, v| t.scale_by(v[0], v[1]))));
    out.push((
        "add-row-bias",
        try_check("add-row-bias", vec![a.clone(), random(vec![3], &mut rng)], |t, v| t.add_row_bias(v[0], v[1])),
    ));
    out.push(("sum", try_check("sum", vec![a.clone()], |t, v| t.sum(v[0]))));
    out.push(("sum-last-dim", try_check("sum-last-dim", vec![a.clone()], |t, v| t.sum_last_dim(v[0]))));
    out.push(("transpose", try_check("transpose", vec![a.clone()], |t, v| t.transpose(v[0]))));
    out.push(("mse", try_check("mse", vec![a.clone(), random(vec![2, 3], &mut rng)], |t, v| t.mse(v[0], v[1]))));
    out.push(("gather", try_check("gather", vec![a.clone()], |t, v| t.gather(v[0], vec![5, 0, 0, 3, 2], vec![5, 1]))));
    out.push(("reshape", try_check("reshape", vec![a.clone()], |t, v| t.reshape(v[0], vec![3, 2]))));
    out.push(("concat", try_check("concat", vec![a, random(vec![2, 2], &mut rng)], |t, v| t.concat(&[v[0], v[1], v[0]]))));

    let a = random(vec![4, 3], &mut rng);
    out.push(("relu", try_check("relu", vec![a.clone()], |t, v| t.relu(v[0]))));
    out.push(("tanh", try_check("tanh", vec![a.clone()], |t, v| t.tanh(v[0]))));
    out.push(("elu", try_check("elu", vec![a.clone()], |t, v| t.elu(v[0]))));
    out.push(("sigmoid", try_check("sigmoid", vec![a.clone()], |t, v| t.sigmoid(v[0]))));
    out.push(("softmax", try_check("softmax", vec![a], |t, v| t.softmax(v[0], 0.5))));
    let pos = Tensor::new(vec![4], vec![0.3, 1.2, 2.0, 0.7]).unwrap().with_grad();
    out.push(("pow-floor", try_check("pow-floor", vec![pos], |t, v| t.pow_floor(v[0], -0.5, 1e-8))));

    let (batch, n, h) = (2, 4, 3);
    let s = random(vec![batch * n, h], &mut rng);
    let r = random(vec![batch * n, h], &mut rng);
    let w = random(vec![n, n], &mut rng);
    for (label, act) in [("edge-aggregate/relu", Activation::Relu), ("edge-aggregate/elu", Activation::Elu), ("edge-aggregate/tanh", Activation::Tanh)] {
        out.push((label, try_check(label, vec![s.clone(), r.clone(), w.clone()], move |t, v| t.edge_aggregate(v[0], v[1], v[2], n, act))));
    }
    out
}
