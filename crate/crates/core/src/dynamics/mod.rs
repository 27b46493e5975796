//! Benchmark dynamical systems and dataset construction.

mod integrate;
mod io;
mod systems;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, GdpError, Result};
use crate::graphs::Graph;
use crate::numcore::Matrix;
use crate::rng::{indexed_seed, stream_seed};

pub use integrate::rk4_integrate;
pub use io::{Manifest, TrajectoryFile, Volume};
pub use systems::{
    deriv_diffusion, deriv_kuramoto, deriv_michaelis_menten, deriv_rossler, springs_acceleration, step_cmn, step_fj,
    step_springs, CmnParams, Coupling, SpringParams,
};

/// RK4 step for Michaelis–Menten, Rössler and diffusion.
pub const ODE_STEP: f64 = 0.01;
/// Rössler runs whose states leave this bound are re-seeded.
pub const ROSSLER_BOUND: f64 = 1e6;
const MAX_RESEEDS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KuramotoParams {
    pub k: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub inner_step: f64,
    /// Inner steps per native snapshot.
    pub substeps: usize,
}

impl Default for KuramotoParams {
    fn default() -> Self {
        Self { k: 0.5, omega_min: 0.5, omega_max: 1.5, inner_step: 0.01, substeps: 10 }
    }
}

/// System tag plus its constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SystemParams {
    MichaelisMenten,
    Rossler { standard_form: bool },
    Diffusion,
    Springs(SpringParams),
    Kuramoto(KuramotoParams),
    FriedkinJohnsen,
    Cmn(CmnParams),
}

pub const SYSTEM_TAGS: [&str; 7] =
    ["michaelis_menten", "rossler", "diffusion", "springs", "kuramoto", "friedkin_johnsen", "cmn"];

impl SystemParams {
    /// Default constants for a tag; `mm` and `fj` are accepted as short forms.
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "michaelis_menten" | "mm" => Self::MichaelisMenten,
            "rossler" => Self::Rossler { standard_form: false },
            "diffusion" => Self::Diffusion,
            "springs" | "spring" => Self::Springs(SpringParams::default()),
            "kuramoto" => Self::Kuramoto(KuramotoParams::default()),
            "friedkin_johnsen" | "fj" => Self::FriedkinJohnsen,
            "cmn" => Self::Cmn(CmnParams::default()),
            other => {
                return Err(GdpError::Parse(format!("unknown system '{other}', expected one of {}", SYSTEM_TAGS.join(", "))))
            }
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::MichaelisMenten => "michaelis_menten",
            Self::Rossler { .. } => "rossler",
            Self::Diffusion => "diffusion",
            Self::Springs(_) => "springs",
            Self::Kuramoto(_) => "kuramoto",
            Self::FriedkinJohnsen => "friedkin_johnsen",
            Self::Cmn(_) => "cmn",
        }
    }

    /// Observed per-node channels.
    pub fn state_dims(&self) -> usize {
        match self {
            Self::Rossler { .. } | Self::Kuramoto(_) => 3,
            Self::Springs(_) => 4,
            _ => 1,
        }
    }

    /// Time-constant per-node inputs (`s_i` for FJ, `ω_i` for Kuramoto).
    pub fn static_dims(&self) -> usize {
        match self {
            Self::Kuramoto(_) | Self::FriedkinJohnsen => 1,
            _ => 0,
        }
    }

    /// Time between consecutive native snapshots.
    pub fn native_spacing(&self) -> f64 {
        match self {
            Self::Diffusion => 0.1,
            Self::Springs(p) => p.inner_step * p.substeps as f64,
            Self::Kuramoto(p) => p.inner_step * p.substeps as f64,
            _ => 1.0,
        }
    }

    /// Constants that are implementation choices rather than published values.
    pub fn artifact_defaults(&self) -> Vec<String> {
        match self {
            Self::Kuramoto(_) => vec!["kuramoto.k".into(), "kuramoto.omega_range".into()],
            _ => Vec::new(),
        }
    }

    fn min_source_len(&self) -> usize {
        match self {
            Self::Springs(_) => 49,
            _ => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Springs(p) => p.k > 0.0 && p.box_half > 0.0 && p.inner_step > 0.0 && p.substeps > 0,
            Self::Kuramoto(p) => p.k >= 0.0 && p.inner_step > 0.0 && p.substeps > 0 && p.omega_max >= p.omega_min,
            Self::Cmn(p) => p.eps > 0.0 && p.eta > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            contract(format!("invalid {} parameters: {self:?}", self.tag()))
        }
    }
}

/// `T × n × d` snapshots, node-major within a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: usize,
    n: usize,
    dims: usize,
    states: Vec<f64>,
    static_features: Option<Matrix>,
    /// Time between consecutive snapshots.
    pub dt: f64,
}

impl Trajectory {
    pub fn new(steps: usize, n: usize, dims: usize, states: Vec<f64>, static_features: Option<Matrix>, dt: f64) -> Result<Self> {
        if steps < 2 {
            return contract(format!("a trajectory needs at least 2 snapshots, got {steps}"));
        }
        if states.len() != steps * n * dims {
            return Err(GdpError::Dimension {
                op: "trajectory",
                detail: format!("{} values for {steps}×{n}×{dims}", states.len()),
            });
        }
        if let Some(s) = &static_features {
            if s.rows() != n {
                return Err(GdpError::Dimension { op: "trajectory", detail: format!("static features for {} nodes", s.rows()) });
            }
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(GdpError::NonFinite { op: "trajectory".into() });
        }
        Ok(Self { steps, n, dims, states, static_features, dt })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Snapshot `t` as an `n·d` node-major slice.
    pub fn snapshot(&self, t: usize) -> &[f64] {
        let w = self.n * self.dims;
        &self.states[t * w..(t + 1) * w]
    }

    pub fn value(&self, t: usize, node: usize, dim: usize) -> f64 {
        self.states[(t * self.n + node) * self.dims + dim]
    }

    pub fn static_features(&self) -> Option<&Matrix> {
        self.static_features.as_ref()
    }

    pub fn static_dims(&self) -> usize {
        self.static_features.as_ref().map_or(0, Matrix::cols)
    }
}

/// Per-dimension affine map of train-split ranges onto `[−1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    #[serde(default)]
    pub static_min: Vec<f64>,
    #[serde(default)]
    pub static_max: Vec<f64>,
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        2.0 * (v - lo) / (hi - lo) - 1.0
    } else {
        0.0
    }
}

impl Normalization {
    pub fn fit(train: &[Trajectory]) -> Result<Self> {
        let first = train.first().ok_or_else(|| GdpError::Contract("no training trajectories".into()))?;
        let (d, f) = (first.dims, first.static_dims());
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        let mut static_min = vec![f64::INFINITY; f];
        let mut static_max = vec![f64::NEG_INFINITY; f];
        for tr in train {
            for chunk in tr.states.chunks(d) {
                for k in 0..d {
                    min[k] = min[k].min(chunk[k]);
                    max[k] = max[k].max(chunk[k]);
                }
            }
            if let Some(s) = &tr.static_features {
                for i in 0..s.rows() {
                    for k in 0..f {
                        static_min[k] = static_min[k].min(s[(i, k)]);
                        static_max[k] = static_max[k].max(s[(i, k)]);
                    }
                }
            }
        }
        Ok(Self { min, max, static_min, static_max })
    }

    pub fn apply(&self, tr: &Trajectory) -> Result<Trajectory> {
        if tr.dims != self.min.len() || tr.static_dims() != self.static_min.len() {
            return Err(GdpError::Dimension { op: "normalize", detail: "channel count differs from the record".into() });
        }
        let d = tr.dims;
        let states = tr.states.iter().enumerate().map(|(q, v)| scale(*v, self.min[q % d], self.max[q % d])).collect();
        let static_features = tr
            .static_features
            .as_ref()
            .map(|s| Matrix::from_fn(s.rows(), s.cols(), |i, k| scale(s[(i, k)], self.static_min[k], self.static_max[k])));
        Trajectory::new(tr.steps, tr.n, d, states, static_features, tr.dt)
    }
}

/// Normalized train/validation trajectories sharing one ground-truth graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `None` for external data.
    pub params: Option<SystemParams>,
    pub graph: Option<Graph>,
    pub directed: bool,
    /// Sampling interval in native snapshots.
    pub interval: usize,
    pub seed: Option<u64>,
    pub train: Vec<Trajectory>,
    pub valid: Vec<Trajectory>,
    pub normalization: Normalization,
}

impl Dataset {
    pub fn system_tag(&self) -> &'static str {
        self.params.as_ref().map_or("external", SystemParams::tag)
    }

    pub fn n(&self) -> usize {
        self.train[0].n
    }

    pub fn state_dims(&self) -> usize {
        self.train[0].dims
    }

    pub fn static_dims(&self) -> usize {
        self.train[0].static_dims()
    }

    /// `(#trajectories, #sampled steps)` of the training split.
    pub fn volume(&self) -> (usize, usize) {
        (self.train.len(), self.train[0].steps)
    }

    /// Every trajectory, train first.
    pub fn all_trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.train.iter().chain(&self.valid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub n_traj: usize,
    /// Sampled snapshots per trajectory.
    pub traj_len: usize,
    pub interval: usize,
    pub n_valid: usize,
    pub seed: u64,
}

impl DataConfig {
    pub fn new(n_traj: usize, traj_len: usize, interval: usize, seed: u64) -> Self {
        Self { n_traj, traj_len, interval, n_valid: 10, seed }
    }
}

/// Native snapshots simulated per trajectory before subsampling.
pub fn source_length(params: &SystemParams, traj_len: usize, interval: usize) -> usize {
    ((traj_len - 1) * interval + 1).max(params.min_source_len())
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Runs one trajectory of `len` native snapshots from a fresh initial condition.
pub fn simulate(params: &SystemParams, coupling: &Coupling, len: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = coupling.n();
    let mut out = Vec::with_capacity(len * n * params.state_dims());
    let ode_steps = (1.0 / ODE_STEP).round() as usize;
    match params {
        SystemParams::MichaelisMenten => {
            let mut x = uniform_vec(rng, n, 0.5, 1.5);
            for t in 0..len {
                if t > 0 {
                    x = rk4_integrate(|x| systems::mm_rhs(x, coupling), &x, ODE_STEP, ode_steps)?;
                }
                out.extend_from_slice(&x);
            }
            Ok((out, None))
        }
        SystemParams::Rossler { standard_form } => {
            let mut x = uniform_vec(rng, 3 * n, -1.0, 1.0);
            for t in 0..len {
                if t > 0 {
                    x = rk4_integrate(|x| Ok(systems::rossler_rhs(x, coupling, *standard_form)), &x, ODE_STEP, ode_steps)
                        .map_err(|_| GdpError::Divergence { step: t })?;
                }
                if x.iter().any(|v| v.abs() > ROSSLER_BOUND) {
                    return Err(GdpError::Divergence { step: t });
                }
                out.extend_from_slice(&x);
            }
            Ok((out, None))
        }
        SystemParams::Diffusion => {
            let mut x = uniform_vec(rng, n, -1.0, 1.0);
            let steps = (0.1 / ODE_STEP).round() as usize;
            for t in 0..len {
                if t > 0 {
                    x = rk4_integrate(|x| systems::diffusion_rhs(x, coupling), &x, ODE_STEP, steps)?;
                }
                out.extend_from_slice(&x);
            }
            Ok((out, None))
        }
        SystemParams::Springs(p) => {
            let normal = Normal::new(0.0, 0.5).expect("valid std");
            let mut state = Vec::with_capacity(4 * n);
            for _ in 0..n {
                let r: [f64; 2] = [normal.sample(rng), normal.sample(rng)];
                let mut v: [f64; 2] = [normal.sample(rng), normal.sample(rng)];
                let norm = (v[0] * v[0] + v[1] * v[1]).sqrt().max(f64::MIN_POSITIVE);
                v = [0.5 * v[0] / norm, 0.5 * v[1] / norm];
                state.extend([r[0].clamp(-p.box_half, p.box_half), r[1].clamp(-p.box_half, p.box_half), v[0], v[1]]);
            }
            for t in 0..len {
                if t > 0 {
                    state = systems::springs_advance(&state, coupling, p);
                }
                out.extend_from_slice(&state);
            }
            Ok((out, None))
        }
        SystemParams::Kuramoto(p) => {
            let mut phi = uniform_vec(rng, n, 0.0, std::f64::consts::TAU);
            let omega = if p.omega_max > p.omega_min {
                uniform_vec(rng, n, p.omega_min, p.omega_max)
            } else {
                vec![p.omega_min; n]
            };
            for t in 0..len {
                if t > 0 {
                    phi = rk4_integrate(|x| Ok(systems::kuramoto_rhs(x, &omega, coupling, p.k)), &phi, p.inner_step, p.substeps)?;
                }
                let dphi = systems::kuramoto_rhs(&phi, &omega, coupling, p.k);
                for i in 0..n {
                    out.extend([dphi[i], phi[i].sin(), phi[i]]);
                }
            }
            Ok((out, Some(Matrix::from_vec(n, 1, omega)?)))
        }
        SystemParams::FriedkinJohnsen => {
            let s = uniform_vec(rng, n, -1.0, 1.0);
            let mut x = uniform_vec(rng, n, -1.0, 1.0);
            for t in 0..len {
                if t > 0 {
                    x = systems::fj_map(&x, &s, coupling);
                }
                out.extend_from_slice(&x);
            }
            Ok((out, Some(Matrix::from_vec(n, 1, s)?)))
        }
        SystemParams::Cmn(p) => {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
            for t in 0..len {
                if t > 0 {
                    x = systems::cmn_map(&x, coupling, p);
                }
                out.extend_from_slice(&x);
            }
            Ok((out, None))
        }
    }
}

fn sampled_trajectory(params: &SystemParams, coupling: &Coupling, cfg: &DataConfig, traj_seed: u64) -> Result<Trajectory> {
    let n = coupling.n();
    let d = params.state_dims();
    let len = source_length(params, cfg.traj_len, cfg.interval);
    let mut attempt = 0;
    let (raw, stat) = loop {
        let seed = if attempt == 0 { traj_seed } else { indexed_seed(traj_seed, "reseed", attempt) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match simulate(params, coupling, len, &mut rng) {
            Ok(r) => break r,
            Err(GdpError::Divergence { step }) => {
                if matches!(params, SystemParams::Rossler { .. }) && attempt < MAX_RESEEDS {
                    attempt += 1;
                    continue;
                }
                return Err(GdpError::TrajectoryDiverged { seed, step });
            }
            Err(e) => return Err(e),
        }
    };
    let w = n * d;
    let mut states = Vec::with_capacity(cfg.traj_len * w);
    for t in 0..cfg.traj_len {
        let s = t * cfg.interval;
        states.extend_from_slice(&raw[s * w..(s + 1) * w]);
    }
    Trajectory::new(cfg.traj_len, n, d, states, stat, params.native_spacing() * cfg.interval as f64)
}

/// Simulates, subsamples every `interval`-th native snapshot and normalizes
/// with the training split's per-dimension range.
pub fn build_dataset(params: &SystemParams, g: &Graph, cfg: &DataConfig) -> Result<Dataset> {
    params.validate()?;
    if cfg.n_traj == 0 || cfg.n_valid == 0 || cfg.interval == 0 {
        return contract("trajectory counts and the sampling interval must be positive");
    }
    if cfg.traj_len < 2 {
        return contract("trajectories need at least 2 sampled steps");
    }
    let coupling = Coupling::new(g)?;
    let simulate_split = |name: &str, count: usize| -> Result<Vec<Trajectory>> {
        (0..count).map(|k| sampled_trajectory(params, &coupling, cfg, indexed_seed(cfg.seed, name, k as u64))).collect()
    };
    let train_raw = simulate_split("train", cfg.n_traj)?;
    let valid_raw = simulate_split("valid", cfg.n_valid)?;
    let normalization = Normalization::fit(&train_raw)?;
    let train = train_raw.iter().map(|t| normalization.apply(t)).collect::<Result<_>>()?;
    let valid = valid_raw.iter().map(|t| normalization.apply(t)).collect::<Result<_>>()?;
    Ok(Dataset {
        params: Some(*params),
        graph: Some(g.clone()),
        directed: g.directed(),
        interval: cfg.interval,
        seed: Some(cfg.seed),
        train,
        valid,
        normalization,
    })
}

/// Seed of the ground-truth graph for a run seed.
pub fn graph_seed(seed: u64) -> u64 {
    stream_seed(seed, "graph")
}
