//! Experiments that train models: method comparisons, escape, distortion,
//! order sweeps, ablations and the stacking control.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{params, ExperimentReport};
use super::{auc_ambiguous, ScoreMatrix};
use crate::baselines::{mi_scores, single_step_baseline, te_scores, BinningConfig};
use crate::dynamics::{build_dataset, graph_seed, DataConfig, Dataset, SystemParams, Trajectory};
use crate::error::{contract, Result};
use crate::graphs::{Graph, GraphSpec};
use crate::model::{branch_filters, branch_mse, edge_probabilities, gdp_loss, predict_scores, train, train_from, EdgeLogits, FilterSource, GdpModel, TrainConfig, Transitions};
use crate::rng::stream;

/// Logit magnitude that pins a frozen graph (probabilities within 1e-4 of 0 or 1).
pub const FROZEN_LOGIT: f64 = 10.0;

/// How a benchmark dataset is generated for a given seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub system: SystemParams,
    pub graph: GraphSpec,
    /// Sampling interval δt in native snapshots.
    pub interval: usize,
    pub n_traj: usize,
    pub traj_len: usize,
    pub n_valid: usize,
}

impl Protocol {
    pub fn new(system: SystemParams, graph: GraphSpec, interval: usize, n_traj: usize, traj_len: usize) -> Self {
        Self { system, graph, interval, n_traj, traj_len, n_valid: 10 }
    }

    fn data_config(&self, seed: u64, n_valid: usize) -> DataConfig {
        DataConfig { n_traj: self.n_traj, traj_len: self.traj_len, interval: self.interval, n_valid, seed }
    }

    pub fn ground_truth(&self, seed: u64) -> Result<Graph> {
        self.graph.generate(graph_seed(seed))
    }

    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        build_dataset(&self.system, &self.ground_truth(seed)?, &self.data_config(seed, self.n_valid))
    }

    /// The dataset plus `n_valid` further held-out trajectories for testing.
    pub fn dataset_with_test(&self, seed: u64) -> Result<(Dataset, Vec<Trajectory>)> {
        let mut data = build_dataset(&self.system, &self.ground_truth(seed)?, &self.data_config(seed, 2 * self.n_valid))?;
        let test = data.valid.split_off(self.n_valid);
        Ok((data, test))
    }

    fn describe(&self, report: &mut ExperimentReport) {
        report.set_meta("system", self.system.tag());
        report.set_meta("graph", self.graph.to_string());
        report.set_meta("dt", self.interval);
        report.set_meta("volume", format!("{}x{}", self.n_traj, self.traj_len));
        report.set_meta("validation_trajectories", self.n_valid);
    }
}

/// Relational-inference methods compared in the benchmark table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gdp,
    SingleStep,
    Mi,
    Te,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Gdp => "gdp",
            Method::SingleStep => "single_step",
            Method::Mi => "mi",
            Method::Te => "te",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "gdp" => Ok(Method::Gdp),
            "single_step" | "single" | "nri" => Ok(Method::SingleStep),
            "mi" => Ok(Method::Mi),
            "te" => Ok(Method::Te),
            other => Err(crate::error::GdpError::Parse(format!("unknown method `{other}` (gdp, single_step, mi, te)"))),
        }
    }
}

fn truth(data: &Dataset) -> Result<&Graph> {
    data.graph.as_ref().ok_or_else(|| crate::error::GdpError::Contract("experiment needs a ground-truth graph".into()))
}

/// Orientation-free AUC, symmetrizing directed scores for undirected truth.
pub fn score_auc(scores: &ScoreMatrix, g: &Graph) -> Result<f64> {
    if scores.directed() && !g.directed() {
        auc_ambiguous(&scores.symmetrized(), g)
    } else {
        auc_ambiguous(scores, g)
    }
}

fn method_auc(method: Method, data: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<f64> {
    let g = truth(data)?;
    match method {
        Method::Gdp => score_auc(&predict_scores(&train(data, cfg, seed)?.model)?, g),
        Method::SingleStep => score_auc(&predict_scores(&single_step_baseline(data, cfg, seed)?.model)?, g),
        Method::Mi => score_auc(&mi_scores(data, &BinningConfig::default())?, g),
        Method::Te => {
            let a = score_auc(&te_scores(data, &BinningConfig::new(2))?, g)?;
            let b = score_auc(&te_scores(data, &BinningConfig::new(200))?, g)?;
            Ok(a.max(b))
        }
    }
}

/// AUC of each method on each seed, for every sampling interval in `dts`.
pub fn compare_methods(protocol: &Protocol, dts: &[usize], seeds: &[u64], cfg: &TrainConfig, methods: &[Method]) -> Result<ExperimentReport> {
    if dts.is_empty() || seeds.is_empty() || methods.is_empty() {
        return contract("method comparison needs intervals, seeds and methods");
    }
    let mut report = ExperimentReport::new("compare");
    protocol.describe(&mut report);
    report.set_meta("mi_bins", BinningConfig::default().bins);
    report.set_meta("te_bins", json!([2, 200]));
    report.set_meta("train", serde_json::to_value(cfg)?);
    for &dt in dts {
        let p = Protocol { interval: dt, ..protocol.clone() };
        for &seed in seeds {
            let data = p.dataset(seed)?;
            for &m in methods {
                let auc = method_auc(m, &data, cfg, seed)?;
                report.push(params(&[("dt", dt.to_string()), ("method", m.tag().to_string())]), seed, &[("auc", auc)]);
            }
        }
    }
    Ok(report.finish())
}

/// Outcome of one warmup-then-switch training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRun {
    pub aucs: Vec<f64>,
    pub plateau_auc: f64,
    /// Highest AUC within the window after the switch.
    pub post_auc: f64,
    /// Epochs after the switch until the AUC first exceeds the plateau by `jump`.
    pub epochs_to_jump: Option<usize>,
}

fn escape_stats(aucs: Vec<f64>, warmup: usize, jump: f64) -> EscapeRun {
    let plateau_auc = if warmup == 0 { aucs.first().copied().unwrap_or(50.0) } else { aucs[warmup - 1] };
    let after = &aucs[warmup.min(aucs.len())..];
    let post_auc = after.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let epochs_to_jump = after.iter().position(|a| *a >= plateau_auc + jump).map(|p| p + 1);
    EscapeRun { aucs, plateau_auc, post_auc, epochs_to_jump }
}

/// Trains with only the adjacency branch for `warmup` epochs, then with both
/// branches for `window` epochs.
pub fn escape_experiment(data: &Dataset, cfg: &TrainConfig, warmup: usize, window: usize, seed: u64, jump: f64) -> Result<EscapeRun> {
    truth(data)?;
    let cfg = TrainConfig { epochs: warmup + window, poly_from: Some(warmup), ..cfg.clone() };
    let t = train(data, &cfg, seed)?;
    let aucs = t.history.epochs.iter().map(|e| e.auc.unwrap_or(50.0)).collect();
    Ok(escape_stats(aucs, warmup, jump))
}

/// Escape runs over seeds, each optionally paired with a control that
/// never switches.
pub fn escape_sweep(protocol: &Protocol, seeds: &[u64], cfg: &TrainConfig, warmup: usize, window: usize, jump: f64, control: bool) -> Result<ExperimentReport> {
    if warmup == 0 {
        return contract("escape sweep needs at least one warmup epoch");
    }
    let mut report = ExperimentReport::new("escape");
    protocol.describe(&mut report);
    report.set_meta("warmup", warmup);
    report.set_meta("window", window);
    report.set_meta("jump_threshold", jump);
    let mut curves = serde_json::Map::new();
    for &seed in seeds {
        let data = protocol.dataset(seed)?;
        let run = escape_experiment(&data, cfg, warmup, window, seed, jump)?;
        let mut m = vec![
            ("plateau_auc", run.plateau_auc),
            ("post_auc", run.post_auc),
            ("gain", run.post_auc - run.plateau_auc),
            ("jumped", if run.epochs_to_jump.is_some() { 1.0 } else { 0.0 }),
        ];
        if let Some(e) = run.epochs_to_jump {
            m.push(("epochs_to_jump", e as f64));
        }
        let mut curve = json!({ "switch": run.aucs });
        if control {
            let c = escape_experiment(&data, &cfg.clone().single_step(), warmup, window, seed, jump)?;
            m.push(("control_gain", c.post_auc - c.plateau_auc));
            curve["control"] = json!(c.aucs);
        }
        report.push(params(&[("warmup", warmup)]), seed, &m);
        curves.insert(seed.to_string(), curve);
    }
    report.set_meta("auc_curves", serde_json::Value::Object(curves));
    Ok(report.finish())
}

/// Toggles a random `fraction` of the node pairs of `g` (edges become
/// non-edges and vice versa).
pub fn flip_pairs(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return contract(format!("flip fraction {fraction} outside [0, 1]"));
    }
    let n = g.n();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j && (g.directed() || i < j)).collect();
    pairs.shuffle(&mut stream(seed, "flip"));
    let count = (fraction * pairs.len() as f64).round() as usize;
    let mut a = g.adjacency().clone();
    for &(i, j) in &pairs[..count] {
        let v = 1.0 - a[(i, j)];
        a[(i, j)] = v;
        if !g.directed() {
            a[(j, i)] = v;
        }
    }
    Graph::from_adjacency(a, g.directed())
}

fn mse_on(model: &GdpModel, trajs: &[Trajectory], adjacency_only: bool) -> Result<f64> {
    let batch = Transitions::from_trajectories(trajs)?.all()?;
    if adjacency_only {
        branch_mse(model, &batch, FilterSource::Adjacency)
    } else {
        gdp_loss(model, &batch)
    }
}

/// Surrogate trained on a frozen, partially flipped graph: final train and
/// held-out one-step MSE per flip fraction.
pub fn distortion_experiment(protocol: &Protocol, fractions: &[f64], runs: &[u64], cfg: &TrainConfig) -> Result<ExperimentReport> {
    if fractions.is_empty() || runs.is_empty() {
        return contract("distortion needs fractions and runs");
    }
    let mut report = ExperimentReport::new("distortion");
    protocol.describe(&mut report);
    report.set_meta("frozen_logit", FROZEN_LOGIT);
    let cfg = TrainConfig { freeze_graph: true, ..cfg.clone() }.single_step();
    for &seed in runs {
        let (data, test) = protocol.dataset_with_test(seed)?;
        let g = truth(&data)?.clone();
        for &f in fractions {
            let distorted = flip_pairs(&g, f, seed)?;
            let mut model = GdpModel::init(cfg.shape(&data), seed)?;
            model.psi = EdgeLogits::from_graph(&distorted, model.shape.tied, FROZEN_LOGIT)?;
            let t = train_from(&data, &cfg, model, seed)?;
            let train_mse = mse_on(&t.model, &data.train, true)?;
            let test_mse = mse_on(&t.model, &test, true)?;
            report.push(params(&[("fraction", f)]), seed, &[("train_mse", train_mse), ("test_mse", test_mse)]);
        }
    }
    Ok(report.finish())
}

/// Full training per polynomial order `K`: AUC and train/test MSE.
pub fn k_sweep(protocol: &Protocol, ks: &[usize], seeds: &[u64], cfg: &TrainConfig) -> Result<ExperimentReport> {
    if ks.is_empty() {
        return contract("K grid must be nonempty");
    }
    let mut report = ExperimentReport::new("k_sweep");
    protocol.describe(&mut report);
    for &seed in seeds {
        let (data, test) = protocol.dataset_with_test(seed)?;
        let g = truth(&data)?;
        for &k in ks {
            let t = train(&data, &TrainConfig { k, ..cfg.clone() }, seed)?;
            report.push(params(&[("k", k)]), seed, &[
                ("auc", score_auc(&predict_scores(&t.model)?, g)?),
                ("train_mse", mse_on(&t.model, &data.train, false)?),
                ("test_mse", mse_on(&t.model, &test, false)?),
            ]);
        }
    }
    Ok(report.finish())
}

/// Scores read from `A¹`, its normalization `Ã¹` and the filter `g_θ(Ã¹)`.
pub fn candidate_scores(model: &GdpModel) -> Result<[ScoreMatrix; 3]> {
    let directed = model.shape.directed;
    let (a0, a1) = edge_probabilities(&model.psi, &model.shape.generator)?;
    let (_, norm) = branch_filters(&a0, &a1, &[0.0, 1.0], FilterSource::Polynomial, directed)?;
    let (_, filt) = branch_filters(&a0, &a1, model.poly.theta.data(), FilterSource::Polynomial, directed)?;
    // filters are [receiver, sender]; scores are [i, j] for i → j
    Ok([predict_scores(model)?, ScoreMatrix::new(norm.transpose(), directed)?, ScoreMatrix::new(filt.transpose(), directed)?])
}

pub const CANDIDATES: [&str; 3] = ["a", "a_norm", "g_theta"];

/// Polynomial-branch-only training against full training on the same seeds.
pub fn ablation_poly_only(protocol: &Protocol, seeds: &[u64], cfg: &TrainConfig) -> Result<ExperimentReport> {
    if seeds.len() < 4 {
        return contract("ablation needs at least four seeds");
    }
    let mut report = ExperimentReport::new("ablation");
    protocol.describe(&mut report);
    let poly_cfg = TrainConfig { adjacency_weight: 0.0, poly_from: Some(0), ..cfg.clone() };
    let mut winners = Vec::new();
    for &seed in seeds {
        let data = protocol.dataset(seed)?;
        let g = truth(&data)?;
        for (variant, c) in [("poly_only", &poly_cfg), ("full", cfg)] {
            let t = train(&data, c, seed)?;
            let aucs: Vec<f64> = candidate_scores(&t.model)?.iter().map(|s| score_auc(s, g)).collect::<Result<_>>()?;
            let best = (0..3).fold(0, |b, i| if aucs[i] > aucs[b] { i } else { b });
            if variant == "poly_only" {
                winners.push(CANDIDATES[best]);
            }
            report.push(params(&[("variant", variant)]), seed, &[
                ("auc_a", aucs[0]),
                ("auc_a_norm", aucs[1]),
                ("auc_g_theta", aucs[2]),
                ("winner", best as f64),
            ]);
        }
    }
    let varies = winners.iter().any(|w| *w != winners[0]);
    report.set_meta("poly_only_winners", json!(winners));
    report.set_meta("winner_varies", varies);
    Ok(report.finish())
}

/// Full training on Watts–Strogatz graphs per rewiring probability.
pub fn ws_sweep(protocol: &Protocol, rewire: &[f64], seeds: &[u64], cfg: &TrainConfig) -> Result<ExperimentReport> {
    let GraphSpec::Ws { n, k, .. } = protocol.graph else {
        return contract("ws sweep needs a Watts–Strogatz graph spec");
    };
    let mut report = ExperimentReport::new("ws_sweep");
    protocol.describe(&mut report);
    for &p in rewire {
        let proto = Protocol { graph: GraphSpec::Ws { n, k, p }, ..protocol.clone() };
        proto.graph.generate(0)?;
        for &seed in seeds {
            let data = proto.dataset(seed)?;
            let g = truth(&data)?;
            let degrees: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
            let t = train(&data, cfg, seed)?;
            report.push(params(&[("p", p)]), seed, &[
                ("auc", score_auc(&predict_scores(&t.model)?, g)?),
                ("clustering", g.mean_clustering()),
                ("degree_std", super::Summary::of(&degrees).std),
            ]);
        }
    }
    Ok(report.finish())
}

/// One- and two-round adjacency surrogates, optionally next to full training.
pub fn stacking_control(protocol: &Protocol, seeds: &[u64], cfg: &TrainConfig, with_gdp: bool) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("stacking");
    protocol.describe(&mut report);
    for &seed in seeds {
        let data = protocol.dataset(seed)?;
        let g = truth(&data)?;
        for rounds in [1, 2] {
            let t = single_step_baseline(&data, &TrainConfig { rounds, ..cfg.clone() }, seed)?;
            report.push(params(&[("variant", format!("rounds_{rounds}"))]), seed, &[("auc", score_auc(&predict_scores(&t.model)?, g)?)]);
        }
        if with_gdp {
            let t = train(&data, cfg, seed)?;
            report.push(params(&[("variant", "gdp")]), seed, &[("auc", score_auc(&predict_scores(&t.model)?, g)?)]);
        }
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Activation;

    fn tiny() -> (Protocol, TrainConfig) {
        let mut p = Protocol::new(SystemParams::MichaelisMenten, "er:6:0.4".parse().unwrap(), 1, 4, 6);
        p.n_valid = 2;
        let cfg = TrainConfig { epochs: 3, hidden: 8, k: 2, activation: Activation::Relu, val_every: 1, ..TrainConfig::default() };
        (p, cfg)
    }

    #[test]
    fn compare_covers_every_method_and_interval() {
        let (p, cfg) = tiny();
        let methods = [Method::Gdp, Method::SingleStep, Method::Mi, Method::Te];
        let r = compare_methods(&p, &[1, 2], &[0, 1], &cfg, &methods).unwrap();
        assert_eq!(r.cells.len(), 8);
        assert_eq!(r.records.len(), 16);
        for rec in &r.records {
            assert!((0.0..=100.0).contains(&rec.metrics["auc"]));
        }
        let again = compare_methods(&p, &[1, 2], &[0, 1], &cfg, &methods).unwrap();
        assert_eq!(r, again);
        for m in methods {
            assert_eq!(Method::from_tag(m.tag()).unwrap(), m);
        }
        assert!(Method::from_tag("granger").is_err());
    }

    #[test]
    fn zero_warmup_is_standard_training() {
        let (p, cfg) = tiny();
        let data = p.dataset(2).unwrap();
        let run = escape_experiment(&data, &cfg, 0, 3, 2, 10.0).unwrap();
        let plain = train(&data, &TrainConfig { epochs: 3, ..cfg.clone() }, 2).unwrap();
        let aucs: Vec<f64> = plain.history.epochs.iter().map(|e| e.auc.unwrap()).collect();
        assert_eq!(run.aucs, aucs);
    }

    #[test]
    fn escape_sweep_reports_switch_and_control() {
        let (p, cfg) = tiny();
        let r = escape_sweep(&p, &[0], &cfg, 2, 2, 5.0, true).unwrap();
        let rec = &r.records[0];
        assert!(rec.metrics.contains_key("gain") && rec.metrics.contains_key("control_gain"));
        assert_eq!(r.metadata["auc_curves"]["0"]["switch"].as_array().unwrap().len(), 4);
        assert!(escape_sweep(&p, &[0], &cfg, 0, 2, 5.0, false).is_err());
    }

    #[test]
    fn flips_touch_the_requested_share_of_pairs() {
        let g = crate::graphs::gen_er(8, 0.3, 1, false).unwrap();
        assert_eq!(flip_pairs(&g, 0.0, 3).unwrap(), g);
        assert_eq!(flip_pairs(&g, 1.0, 3).unwrap().adjacency(), g.complement().adjacency());
        let h = flip_pairs(&g, 0.25, 3).unwrap();
        let changed = (0..8).flat_map(|i| (i + 1..8).map(move |j| (i, j))).filter(|&(i, j)| g.has_edge(i, j) != h.has_edge(i, j)).count();
        assert_eq!(changed, 7);
        assert!(h.adjacency().transpose() == *h.adjacency());
        let d = crate::graphs::gen_er(5, 0.3, 1, true).unwrap();
        let dh = flip_pairs(&d, 0.5, 4).unwrap();
        let changed = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|&(i, j)| i != j && d.has_edge(i, j) != dh.has_edge(i, j)).count();
        assert_eq!(changed, 10);
        assert!(flip_pairs(&g, 1.5, 0).is_err());
    }

    #[test]
    fn distortion_keeps_the_graph_frozen() {
        let (p, cfg) = tiny();
        let r = distortion_experiment(&p, &[0.0, 0.5], &[0], &cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        for rec in &r.records {
            assert!(rec.metrics["train_mse"].is_finite() && rec.metrics["test_mse"] > 0.0);
        }
    }

    #[test]
    fn candidate_scores_follow_their_definitions() {
        let (p, cfg) = tiny();
        let data = p.dataset(0).unwrap();
        let model = GdpModel::init(cfg.shape(&data), 0).unwrap();
        let [a, norm, filt] = candidate_scores(&model).unwrap();
        let (_, a1) = edge_probabilities(&model.psi, &model.shape.generator).unwrap();
        let deg: Vec<f64> = (0..6).map(|i| (0..6).filter(|&j| j != i).map(|j| a1[(i, j)]).sum()).collect();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!((norm.get(i, j) - a1[(i, j)] / (deg[i] * deg[j]).sqrt()).abs() < 1e-12);
                }
            }
        }
        // the identity-initialized filter is the normalized matrix
        assert!(filt.matrix().sub(norm.matrix()).unwrap().max_abs() < 1e-12);
        assert_eq!(a, predict_scores(&model).unwrap());
    }

    #[test]
    fn ablation_and_stacking_report_their_variants() {
        let (p, cfg) = tiny();
        assert!(ablation_poly_only(&p, &[0, 1, 2], &cfg).is_err());
        let r = ablation_poly_only(&p, &[0, 1, 2, 3], &cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.metadata["winner_varies"].is_boolean());
        let s = stacking_control(&p, &[0], &cfg, true).unwrap();
        let variants: Vec<&str> = s.cells.iter().map(|c| c.params["variant"].as_str()).collect();
        assert_eq!(variants, ["rounds_1", "rounds_2", "gdp"]);
    }

    #[test]
    fn ws_sweep_needs_a_ws_spec() {
        let (mut p, cfg) = tiny();
        assert!(ws_sweep(&p, &[0.1], &[0], &cfg).is_err());
        p.graph = "ws:8:2:0.0".parse().unwrap();
        p.system = SystemParams::Diffusion;
        let r = ws_sweep(&p, &[0.0, 1.0], &[0], &cfg).unwrap();
        assert_eq!(r.mean(&[("p", "0")], "degree_std"), Some(0.0));
    }
}
