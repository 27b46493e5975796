//! Statistical reconstruction baselines and the adjacency-only surrogate.

use serde::{Deserialize, Serialize};

use crate::dynamics::Dataset;
use crate::error::{contract, Result};
use crate::model::{train, TrainConfig, TrainedModel};
use crate::numcore::Matrix;
use crate::scores::ScoreMatrix;

/// Histogram discretization of each scalar series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub bins: usize,
    /// Equal-frequency bins instead of equal-width bins over the observed range.
    #[serde(default)]
    pub quantile: bool,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self { bins: 16, quantile: false }
    }
}

impl BinningConfig {
    pub fn new(bins: usize) -> Self {
        Self { bins, quantile: false }
    }

    fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return contract(format!("need at least 2 bins, got {}", self.bins));
        }
        Ok(())
    }

    /// Bin index of every value.
    pub fn discretize(&self, values: &[f64]) -> Vec<u32> {
        let b = self.bins;
        if self.quantile {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|x, y| values[*x].total_cmp(&values[*y]));
            let mut out = vec![0u32; values.len()];
            let len = values.len().max(1);
            let mut start = 0;
            while start < order.len() {
                // equal values share the bin of their first rank
                let mut end = start + 1;
                while end < order.len() && values[order[end]] == values[order[start]] {
                    end += 1;
                }
                let bin = (start * b / len) as u32;
                for k in &order[start..end] {
                    out[*k] = bin;
                }
                start = end;
            }
            return out;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return vec![0; values.len()];
        }
        values.iter().map(|v| (((v - lo) / (hi - lo) * b as f64) as usize).min(b - 1) as u32).collect()
    }
}

/// Plug-in entropy (nats) of the joint symbols in `keys`.
fn entropy(keys: &mut [u64]) -> f64 {
    if keys.is_empty() {
        return 0.0;
    }
    keys.sort_unstable();
    let total = keys.len() as f64;
    let mut h = 0.0;
    let mut start = 0;
    while start < keys.len() {
        let mut end = start + 1;
        while end < keys.len() && keys[end] == keys[start] {
            end += 1;
        }
        let p = (end - start) as f64 / total;
        h -= p * p.ln();
        start = end;
    }
    h
}

fn key(parts: &[u32]) -> u64 {
    parts.iter().fold(0u64, |acc, p| (acc << 21) | *p as u64)
}

/// Discretized series per (node, dim), concatenated over trajectories, and
/// the trajectory boundaries.
fn binned_series(data: &Dataset, cfg: &BinningConfig) -> (Vec<Vec<Vec<u32>>>, Vec<usize>) {
    let (n, d) = (data.n(), data.state_dims());
    let mut lengths = Vec::new();
    let mut raw = vec![vec![Vec::new(); d]; n];
    for tr in data.all_trajectories() {
        lengths.push(tr.steps());
        for t in 0..tr.steps() {
            for (i, node) in raw.iter_mut().enumerate() {
                for (k, series) in node.iter_mut().enumerate() {
                    series.push(tr.value(t, i, k));
                }
            }
        }
    }
    let binned = raw.iter().map(|node| node.iter().map(|s| cfg.discretize(s)).collect()).collect();
    (binned, lengths)
}

/// Pairwise mutual information (nats) averaged over state dimensions, pooled
/// over training and validation trajectories.
pub fn mi_scores(data: &Dataset, cfg: &BinningConfig) -> Result<ScoreMatrix> {
    cfg.validate()?;
    let (n, d) = (data.n(), data.state_dims());
    let (series, _) = binned_series(data, cfg);
    if series.first().map_or(true, |s| s[0].is_empty()) {
        return contract("no samples for mutual information");
    }
    let marginal: Vec<Vec<f64>> = series.iter().map(|node| node.iter().map(|s| entropy(&mut s.iter().map(|v| *v as u64).collect::<Vec<_>>())).collect()).collect();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut total = 0.0;
            for k in 0..d {
                let mut joint: Vec<u64> = series[i][k].iter().zip(&series[j][k]).map(|(a, b)| key(&[*a, *b])).collect();
                total += (marginal[i][k] + marginal[j][k] - entropy(&mut joint)).max(0.0);
            }
            m[(i, j)] = total / d as f64;
            m[(j, i)] = m[(i, j)];
        }
    }
    ScoreMatrix::new(m, false)
}

/// Transfer entropy `TE(i → j)` at entry `(i, j)` with one lag, averaged over
/// state dimensions and clamped at 0.
pub fn te_scores(data: &Dataset, cfg: &BinningConfig) -> Result<ScoreMatrix> {
    cfg.validate()?;
    let (n, d) = (data.n(), data.state_dims());
    let (series, lengths) = binned_series(data, cfg);
    // indices (t-1, t) of consecutive snapshots inside one trajectory
    let mut pairs = Vec::new();
    let mut offset = 0;
    for len in lengths {
        pairs.extend((1..len).map(|t| (offset + t - 1, offset + t)));
        offset += len;
    }
    if pairs.is_empty() {
        return contract("transfer entropy needs trajectories with at least two snapshots");
    }
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..d {
            let y = &series[j][k];
            let h_past = entropy(&mut pairs.iter().map(|(p, _)| y[*p] as u64).collect::<Vec<_>>());
            let h_now_past = entropy(&mut pairs.iter().map(|(p, c)| key(&[y[*c], y[*p]])).collect::<Vec<_>>());
            for i in 0..n {
                if i == j {
                    continue;
                }
                let x = &series[i][k];
                let h_past2 = entropy(&mut pairs.iter().map(|(p, _)| key(&[y[*p], x[*p]])).collect::<Vec<_>>());
                let h_all = entropy(&mut pairs.iter().map(|(p, c)| key(&[y[*c], y[*p], x[*p]])).collect::<Vec<_>>());
                // H(y_t | y_{t-1}) − H(y_t | y_{t-1}, x_{t-1})
                let te = (h_now_past - h_past) - (h_all - h_past2);
                m[(i, j)] += te.max(0.0) / d as f64;
            }
        }
    }
    ScoreMatrix::new(m, true)
}

/// The adjacency surrogate trained alone, with the same machinery as the full model.
pub fn single_step_baseline(data: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    train(data, &cfg.clone().single_step(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Normalization, Trajectory};
    use crate::graphs::Graph;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A dataset holding one trajectory with the given per-node series.
    fn dataset(series: &[Vec<f64>]) -> Dataset {
        let n = series.len();
        let steps = series[0].len();
        let states = (0..steps).flat_map(|t| series.iter().map(move |s| s[t])).collect();
        let tr = Trajectory::new(steps, n, 1, states, None, 1.0).unwrap();
        Dataset {
            params: None,
            graph: Some(Graph::empty(n, false)),
            directed: false,
            interval: 1,
            seed: None,
            normalization: Normalization::fit(std::slice::from_ref(&tr)).unwrap(),
            train: vec![tr],
            valid: vec![],
        }
    }

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mi_examples() {
        let a = noise(10_000, 1);
        let b = noise(10_000, 2);
        // exactly balanced, so the entropy is ln 2
        let sign: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let data = dataset(&[a.clone(), b, a.clone(), sign.clone(), sign]);
        let m = mi_scores(&data, &BinningConfig::new(2)).unwrap();
        assert!(m.get(0, 1) < 0.05);
        assert!((m.get(3, 4) - 2f64.ln()).abs() < 1e-6);
        let m16 = mi_scores(&data, &BinningConfig::default()).unwrap();
        let h0 = m16.get(0, 2);
        assert!((0..5).filter(|j| *j != 0).all(|j| m16.get(0, j) <= h0));
        assert!(m16.is_symmetric());
        assert!(mi_scores(&data, &BinningConfig::new(1)).is_err());
    }

    #[test]
    fn constant_series_has_zero_information() {
        let data = dataset(&[vec![0.5; 50], noise(50, 3)]);
        assert_eq!(mi_scores(&data, &BinningConfig::default()).unwrap().get(0, 1), 0.0);
        assert_eq!(te_scores(&data, &BinningConfig::new(2)).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn te_examples() {
        let x = noise(20_000, 4);
        let mut y = vec![0.0];
        y.extend_from_slice(&x[..x.len() - 1]);
        let z = noise(20_000, 5);
        let data = dataset(&[x, y, z]);
        let te = te_scores(&data, &BinningConfig::new(2)).unwrap();
        assert!((te.get(0, 1) - 2f64.ln()).abs() < 0.01, "{}", te.get(0, 1));
        assert!(te.get(1, 0) < 0.01);
        assert!(te.get(2, 0) < 0.01 && te.get(0, 2) < 0.01);
        assert_eq!(te.get(1, 1), 0.0);
        assert!(te.directed());
        let te200 = te_scores(&data, &BinningConfig::new(200)).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| te200.get(i, j) >= 0.0)));
    }

    #[test]
    fn single_step_with_no_epochs_is_chance() {
        let g = crate::graphs::gen_er(12, 0.3, 1, false).unwrap();
        let data = crate::dynamics::build_dataset(
            &crate::dynamics::SystemParams::Diffusion,
            &g,
            &crate::dynamics::DataConfig { n_valid: 1, ..crate::dynamics::DataConfig::new(2, 4, 1, 1) },
        )
        .unwrap();
        let cfg = TrainConfig { epochs: 0, hidden: 4, ..TrainConfig::default() };
        let t = single_step_baseline(&data, &cfg, 9).unwrap();
        let auc = crate::experiments::auc(&crate::model::predict_scores(&t.model).unwrap(), &g).unwrap();
        assert!((auc - 50.0).abs() <= 15.0, "{auc}");
        assert_eq!(t.config.poly_from, None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn mi_is_symmetric_and_te_nonnegative(seed in 0u64..1000, bins in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series: Vec<Vec<f64>> = (0..4).map(|_| (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let data = dataset(&series);
            let m = mi_scores(&data, &BinningConfig::new(bins)).unwrap();
            prop_assert_eq!(m.matrix().clone(), m.matrix().transpose());
            let te = te_scores(&data, &BinningConfig::new(bins)).unwrap();
            prop_assert!(te.matrix().as_slice().iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn quantile_mi_ignores_monotone_transforms(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
            let warped: Vec<f64> = b.iter().map(|v| (3.0 * v).exp() + v).collect();
            let cfg = BinningConfig { bins: 6, quantile: true };
            let m1 = mi_scores(&dataset(&[a.clone(), b]), &cfg).unwrap();
            let m2 = mi_scores(&dataset(&[a, warped]), &cfg).unwrap();
            prop_assert_eq!(m1.get(0, 1), m2.get(0, 1));
        }
    }
}
