//! Right-hand sides and discrete maps of the benchmark systems.
//!
//! States are flat node-major buffers: entry `i * d + k` is dimension `k`
//! of node `i`. Neighbour sets are in-neighbours, so directed graphs feed
//! node `i` from the sources of edges `j → i`.

use serde::{Deserialize, Serialize};

use crate::error::{GdpError, Result};
use crate::graphs::{in_deg_normalize, sym_normalize, Graph};
use crate::numcore::Matrix;

/// Precomputed neighbour lists and the normalized propagation matrix.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub(crate) nbrs: Vec<Vec<usize>>,
    pub(crate) norm: Matrix,
}

impl Coupling {
    pub fn new(g: &Graph) -> Result<Self> {
        let nbrs = (0..g.n()).map(|i| g.in_neighbors(i)).collect();
        let norm = if g.directed() { in_deg_normalize(g)? } else { sym_normalize(g)? };
        Ok(Self { nbrs, norm })
    }

    pub fn n(&self) -> usize {
        self.nbrs.len()
    }
}

fn mean_over<F: Fn(usize) -> f64>(nbrs: &[usize], f: F) -> f64 {
    if nbrs.is_empty() {
        0.0
    } else {
        nbrs.iter().map(|&j| f(j)).sum::<f64>() / nbrs.len() as f64
    }
}

pub(crate) fn mm_rhs(x: &[f64], c: &Coupling) -> Result<Vec<f64>> {
    if let Some(j) = x.iter().position(|v| *v == -1.0) {
        return Err(GdpError::Singularity(format!("node {j} sits at x = -1")));
    }
    Ok((0..c.n()).map(|i| -x[i] + mean_over(&c.nbrs[i], |j| x[j] / (1.0 + x[j]))).collect())
}

/// `ẋ_i = −x_i + mean_{j∈N_i} x_j / (1 + x_j)`.
pub fn deriv_michaelis_menten(x: &[f64], g: &Graph) -> Result<Vec<f64>> {
    mm_rhs(x, &Coupling::new(g)?)
}

pub(crate) fn rossler_rhs(x: &[f64], c: &Coupling, standard_form: bool) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..c.n() {
        let (x1, x2, x3) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        out[3 * i] = -x2 - x3 + mean_over(&c.nbrs[i], |j| x[3 * j].sin());
        out[3 * i + 1] = x1 + 0.1 * x2;
        out[3 * i + 2] = if standard_form { 0.1 + x3 * (x1 - 18.0) } else { 0.1 + x3 * (x3 - 18.0) };
    }
    out
}

/// Graph-coupled Rössler oscillators on an `n × 3` state.
///
/// By default the third component follows `ẋ₃ = 0.1 + x₃(x₃ − 18)`;
/// `standard_form` switches to the textbook `0.1 + x₃(x₁ − 18)`.
pub fn deriv_rossler(x: &[f64], g: &Graph, standard_form: bool) -> Result<Vec<f64>> {
    check_len("rossler", x, g.n() * 3)?;
    Ok(rossler_rhs(x, &Coupling::new(g)?, standard_form))
}

pub(crate) fn diffusion_rhs(x: &[f64], c: &Coupling) -> Result<Vec<f64>> {
    c.norm.matvec(x)
}

/// `ẋ = Ã x`, with in-degree normalization for directed graphs.
pub fn deriv_diffusion(x: &[f64], g: &Graph) -> Result<Vec<f64>> {
    diffusion_rhs(x, &Coupling::new(g)?)
}

pub(crate) fn kuramoto_rhs(phi: &[f64], omega: &[f64], c: &Coupling, k: f64) -> Vec<f64> {
    (0..c.n())
        .map(|i| omega[i] + k * c.nbrs[i].iter().map(|&j| (phi[j] - phi[i]).sin()).sum::<f64>())
        .collect()
}

/// `φ̇_i = ω_i + k Σ_{j∈N_i} sin(φ_j − φ_i)`.
pub fn deriv_kuramoto(phi: &[f64], omega: &[f64], g: &Graph, k: f64) -> Result<Vec<f64>> {
    check_len("kuramoto", phi, g.n())?;
    check_len("kuramoto", omega, g.n())?;
    Ok(kuramoto_rhs(phi, omega, &Coupling::new(g)?, k))
}

/// Hooke's-law accelerations `−k Σ_{j∈N_i} (r_i − r_j)` for 2-D positions.
pub fn springs_acceleration(pos: &[f64], g: &Graph, k: f64) -> Result<Vec<f64>> {
    check_len("springs", pos, g.n() * 2)?;
    Ok(spring_acc(pos, &Coupling::new(g)?, k))
}

fn spring_acc(pos: &[f64], c: &Coupling, k: f64) -> Vec<f64> {
    let mut acc = vec![0.0; pos.len()];
    for i in 0..c.n() {
        for &j in &c.nbrs[i] {
            acc[2 * i] -= k * (pos[2 * i] - pos[2 * j]);
            acc[2 * i + 1] -= k * (pos[2 * i + 1] - pos[2 * j + 1]);
        }
    }
    acc
}

/// Spring-system constants: box `[−half, half]²`, velocity-Verlet step and
/// the number of inner steps per observed snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    pub k: f64,
    pub box_half: f64,
    pub inner_step: f64,
    pub substeps: usize,
}

impl Default for SpringParams {
    fn default() -> Self {
        Self { k: 0.1, box_half: 2.5, inner_step: 0.001, substeps: 100 }
    }
}

fn reflect(p: &mut f64, v: &mut f64, half: f64) {
    // a single fold suffices while |v|·step stays far below the box size
    if *p > half {
        *p = 2.0 * half - *p;
        *v = -v.abs();
    } else if *p < -half {
        *p = -2.0 * half - *p;
        *v = v.abs();
    }
}

pub(crate) fn springs_advance(state: &[f64], c: &Coupling, p: &SpringParams) -> Vec<f64> {
    let n = c.n();
    let mut pos: Vec<f64> = (0..n).flat_map(|i| [state[4 * i], state[4 * i + 1]]).collect();
    let mut vel: Vec<f64> = (0..n).flat_map(|i| [state[4 * i + 2], state[4 * i + 3]]).collect();
    let h = p.inner_step;
    let mut acc = spring_acc(&pos, c, p.k);
    for _ in 0..p.substeps {
        for q in 0..2 * n {
            vel[q] += 0.5 * h * acc[q];
            pos[q] += h * vel[q];
        }
        for q in 0..2 * n {
            let (pq, vq) = (&mut pos[q], &mut vel[q]);
            reflect(pq, vq, p.box_half);
        }
        acc = spring_acc(&pos, c, p.k);
        for q in 0..2 * n {
            vel[q] += 0.5 * h * acc[q];
        }
    }
    (0..n).flat_map(|i| [pos[2 * i], pos[2 * i + 1], vel[2 * i], vel[2 * i + 1]]).collect()
}

/// One observed spring step on an `n × 4` state `(r_x, r_y, v_x, v_y)`.
pub fn step_springs(state: &[f64], g: &Graph, params: &SpringParams) -> Result<Vec<f64>> {
    check_len("springs", state, g.n() * 4)?;
    let half = params.box_half;
    if state.chunks(4).any(|s| s[0].abs() > half || s[1].abs() > half) {
        return Err(GdpError::Contract(format!("particle outside the box [-{half}, {half}]²")));
    }
    Ok(springs_advance(state, &Coupling::new(g)?, params))
}

pub(crate) fn fj_map(x: &[f64], s: &[f64], c: &Coupling) -> Vec<f64> {
    (0..c.n())
        .map(|i| (s[i] + c.nbrs[i].iter().map(|&j| x[j]).sum::<f64>()) / (1.0 + c.nbrs[i].len() as f64))
        .collect()
}

/// Friedkin–Johnsen update `x_i' = (s_i + Σ_{j∈N_i} x_j) / (1 + |N_i|)`.
pub fn step_fj(x: &[f64], s: &[f64], g: &Graph) -> Result<Vec<f64>> {
    check_len("fj", x, g.n())?;
    check_len("fj", s, g.n())?;
    Ok(fj_map(x, s, &Coupling::new(g)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmnParams {
    pub eps: f64,
    pub eta: f64,
}

impl Default for CmnParams {
    fn default() -> Self {
        Self { eps: 0.2, eta: 3.5 }
    }
}

pub(crate) fn cmn_map(x: &[f64], c: &Coupling, p: &CmnParams) -> Vec<f64> {
    let f = |v: f64| p.eta * v * (1.0 - v);
    (0..c.n())
        .map(|i| {
            let own = (1.0 - p.eps) * f(x[i]);
            if c.nbrs[i].is_empty() {
                own
            } else {
                own + p.eps * mean_over(&c.nbrs[i], |j| f(x[j]))
            }
        })
        .collect()
}

/// Coupled logistic maps; isolated nodes keep only `(1 − ε) f(x)`.
pub fn step_cmn(x: &[f64], g: &Graph, params: &CmnParams) -> Result<Vec<f64>> {
    check_len("cmn", x, g.n())?;
    Ok(cmn_map(x, &Coupling::new(g)?, params))
}

fn check_len(op: &'static str, x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(GdpError::Dimension { op, detail: format!("state length {} (expected {expected})", x.len()) });
    }
    Ok(())
}
