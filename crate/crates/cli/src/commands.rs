use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gdp_core::baselines::{mi_scores, single_step_baseline, te_scores, BinningConfig};
use gdp_core::dynamics::{build_dataset, graph_seed, DataConfig, Dataset, SystemParams};
use gdp_core::experiments::{
    ablation_poly_only, auc, compare_methods, distortion_experiment, escape_sweep, fig2_sweep, fig3_noise_amplifier, k_sweep,
    root_enumeration, score_auc, stacking_control, ws_sweep, ExperimentReport, Method, NoiseAmplifierConfig, Protocol, Summary,
};
use gdp_core::graphs::{EffectiveMode, Graph, GraphSpec};
use gdp_core::model::{predict_scores, train, Checkpoint, History, TrainConfig, TrainedModel};
use gdp_core::{ScoreMatrix, VERSION};

use crate::config::{RunConfig, TRAIN_KEYS};
use crate::error::{usage, CliError, CliResult};

const COMMON_KEYS: &[&str] = &["out", "name"];
const PROTOCOL_KEYS: &[&str] = &["system", "graph", "dt", "traj", "len", "valid"];

fn system_of(tag: &str) -> CliResult<SystemParams> {
    SystemParams::from_tag(tag).map_err(|e| CliError::Usage(e.to_string()))
}

fn graph_of(text: &str) -> CliResult<GraphSpec> {
    text.parse().map_err(|e: gdp_core::GdpError| CliError::Usage(e.to_string()))
}

/// Dataset protocol; `--dt` may list several intervals, the first is used here.
fn protocol(cfg: &mut RunConfig, system: &str, graph: &str, dt: usize, traj: usize, len: usize) -> CliResult<Protocol> {
    let system = system_of(&cfg.get("system", system.to_string())?)?;
    let graph = graph_of(&cfg.get("graph", graph.to_string())?)?;
    let dts = cfg.list::<usize>("dt", &dt.to_string())?;
    let mut p = Protocol::new(system, graph, dts[0], cfg.get("traj", traj)?, cfg.get("len", len)?);
    p.n_valid = cfg.get("valid", p.n_valid)?;
    if p.interval == 0 || p.n_traj == 0 || p.traj_len < 2 {
        return usage("dt and traj must be positive and len at least 2");
    }
    Ok(p)
}

/// Simulates one dataset and writes it under `<out>/<name>`.
pub fn generate(mut cfg: RunConfig) -> CliResult<()> {
    cfg.check_keys(&[COMMON_KEYS, PROTOCOL_KEYS, &["seed"]])?;
    let system = system_of(cfg.require("system")?)?;
    let spec = graph_of(cfg.require("graph")?)?;
    let seed = cfg.get("seed", 0u64)?;
    let data_cfg = DataConfig {
        n_traj: cfg.get("traj", 50usize)?,
        traj_len: cfg.get("len", 10usize)?,
        interval: cfg.get("dt", 1usize)?,
        n_valid: cfg.get("valid", 10usize)?,
        seed,
    };
    if data_cfg.interval == 0 || data_cfg.n_traj == 0 || data_cfg.traj_len < 2 {
        return usage("dt and traj must be positive and len at least 2");
    }
    let name = cfg.get("name", system.tag().to_string())?;
    let dir = cfg.out_root().join(name);
    let g = spec.generate(graph_seed(seed))?;
    let data = build_dataset(&system, &g, &data_cfg)?;
    data.write(&dir, Some(cfg.to_json()))?;
    println!("wrote {} ({} training and {} validation trajectories, {} edges)", dir.display(), data.train.len(), data.valid.len(), g.edge_count());
    Ok(())
}

fn manifest_path(data: &str) -> PathBuf {
    let p = PathBuf::from(data);
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p
    }
}

fn history_csv(h: &History) -> String {
    let mut s = String::from("epoch,train_loss,valid_loss,auc,poly_active\n");
    for e in &h.epochs {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.train_loss, opt(e.valid_loss), opt(e.auc), u8::from(e.poly_active));
    }
    s
}

fn run_seeds(data: &Dataset, tcfg: &TrainConfig, seeds: &[u64], single: bool, jobs: usize) -> Vec<gdp_core::Result<TrainedModel>> {
    let fit = |s: u64| if single { single_step_baseline(data, tcfg, s) } else { train(data, tcfg, s) };
    if jobs <= 1 || seeds.len() <= 1 {
        return seeds.iter().map(|&s| fit(s)).collect();
    }
    let mut out: Vec<Option<gdp_core::Result<TrainedModel>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let fit = &fit;
        let handles: Vec<_> = (0..jobs.min(seeds.len()))
            .map(|w| scope.spawn(move || (w..seeds.len()).step_by(jobs).map(|i| (i, fit(seeds[i]))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("training worker panicked") {
                out[i] = Some(r);
            }
        }
    });
    out.into_iter().map(|r| r.expect("every seed assigned")).collect()
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).map_err(gdp_core::GdpError::from)? + "\n").map_err(gdp_core::GdpError::from)?;
    Ok(())
}

/// Fits GDP or a baseline on a stored dataset.
pub fn train_cmd(mut cfg: RunConfig) -> CliResult<()> {
    cfg.check_keys(&[COMMON_KEYS, TRAIN_KEYS, &["data", "seeds", "baseline", "bins", "jobs"]])?;
    let manifest = manifest_path(cfg.require("data")?);
    if !manifest.is_file() {
        return Err(CliError::Data(format!("dataset manifest {} not found", manifest.display())));
    }
    let data = Dataset::load(&manifest)?;
    let method = match cfg.get("baseline", "gdp".to_string())?.as_str() {
        "gdp" | "none" => Method::Gdp,
        "single-step" | "single_step" | "nri" => Method::SingleStep,
        "mi" => Method::Mi,
        "te" => Method::Te,
        other => return usage(format!("--baseline `{other}`: expected gdp, single-step, mi or te")),
    };
    let dataset_name = manifest.parent().and_then(Path::file_name).map_or("data".into(), |n| n.to_string_lossy().into_owned());
    let name = cfg.get("name", dataset_name)?;
    let dir = cfg.out_root().join("runs").join(name).join(method.tag());
    std::fs::create_dir_all(&dir).map_err(gdp_core::GdpError::from)?;

    let mut per_seed = Vec::new();
    match method {
        Method::Gdp | Method::SingleStep => {
            let seeds = cfg.list::<u64>("seeds", "0")?;
            let jobs = cfg.get("jobs", 1usize)?;
            let tcfg = cfg.train_config()?;
            for (seed, result) in seeds.iter().zip(run_seeds(&data, &tcfg, &seeds, method == Method::SingleStep, jobs)) {
                let trained = result?;
                let sdir = dir.join(format!("seed_{seed}"));
                std::fs::create_dir_all(&sdir).map_err(gdp_core::GdpError::from)?;
                Checkpoint::new(&trained, cfg.resolved()).write(&sdir.join("checkpoint.json"))?;
                std::fs::write(sdir.join("history.csv"), history_csv(&trained.history)).map_err(gdp_core::GdpError::from)?;
                let scores = predict_scores(&trained.model)?;
                scores.write_csv(&sdir.join("scores.csv"))?;
                per_seed.push((Some(*seed), scores));
            }
        }
        Method::Mi | Method::Te => {
            let bins = cfg.get("bins", BinningConfig::default().bins)?;
            let binning = BinningConfig::new(bins);
            let scores = if method == Method::Mi { mi_scores(&data, &binning)? } else { te_scores(&data, &binning)? };
            scores.write_csv(&dir.join("scores.csv"))?;
            per_seed.push((None, scores));
        }
    }

    let aucs: Option<Vec<f64>> = match &data.graph {
        Some(g) => Some(per_seed.iter().map(|(_, s)| score_auc(s, g)).collect::<gdp_core::Result<_>>()?),
        None => None,
    };
    let runs: Vec<serde_json::Value> = per_seed
        .iter()
        .enumerate()
        .map(|(i, (seed, _))| serde_json::json!({ "seed": seed, "auc": aucs.as_ref().map(|a| a[i]) }))
        .collect();
    let summary = aucs.as_ref().map(|a| Summary::of(a));
    write_json(
        &dir.join("summary.json"),
        &serde_json::json!({ "version": VERSION, "method": method.tag(), "config": cfg.to_json(), "runs": runs, "auc": summary }),
    )?;
    match summary {
        Some(s) => println!("{} auc {:.2} ± {:.2} over {} run(s); artifacts in {}", method.tag(), s.mean, s.std, s.count, dir.display()),
        None => println!("{}: no ground truth in the manifest; scores written to {}", method.tag(), dir.display()),
    }
    Ok(())
}

/// Experiment tags and the extra keys each accepts.
pub const EXPERIMENTS: &[(&str, &[&str])] = &[
    ("fig2", &["graph", "seeds", "mode", "beta", "dt"]),
    ("fig3", &["graph", "seed", "t", "K", "eps", "draws", "theta"]),
    ("roots", &["n", "order", "seeds"]),
    ("compare", &["seeds", "methods"]),
    ("escape", &["seeds", "warmup", "window", "jump", "control"]),
    ("distortion", &["seeds", "fractions"]),
    ("ksweep", &["seeds", "K"]),
    ("ablation", &["seeds"]),
    ("ws", &["seeds", "p"]),
    ("stacking", &["seeds", "with_gdp"]),
];

fn run_experiment(tag: &str, cfg: &mut RunConfig) -> CliResult<ExperimentReport> {
    let report = match tag {
        "fig2" => {
            let mode = match cfg.get("mode", "continuous".to_string())?.as_str() {
                "continuous" => EffectiveMode::Continuous,
                "discrete" => EffectiveMode::Discrete,
                other => return usage(format!("--mode `{other}`: expected continuous or discrete")),
            };
            let spec = graph_of(&cfg.get("graph", "er:30:0.3".to_string())?)?;
            let default_dt = if mode == EffectiveMode::Discrete { "1..6" } else { "0.01,0.5,1,2,4" };
            let dts = cfg.list::<f64>("dt", default_dt)?;
            fig2_sweep(&spec, &cfg.list("seeds", "0..19")?, cfg.get("beta", 1.0)?, &dts, mode)?
        }
        "fig3" => {
            let d = NoiseAmplifierConfig::default();
            let spec = graph_of(&cfg.get("graph", "er:50:0.1".to_string())?)?;
            let seed = cfg.get("seed", 0u64)?;
            let nc = NoiseAmplifierConfig {
                eps: cfg.list("eps", "0,0.01,0.02,0.05,0.1,0.2")?,
                ts: cfg.list("t", "1e-5")?,
                orders: cfg.list("K", "1..5")?,
                theta: cfg.get("theta", d.theta)?,
                draws: cfg.get("draws", d.draws)?,
                seed,
            };
            nc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            fig3_noise_amplifier(&nc, &spec.generate(graph_seed(seed))?)?
        }
        "roots" => {
            let order = cfg.get("order", 2usize)?;
            if order == 0 {
                return usage("--order must be at least 1");
            }
            let mut theta = vec![0.0; order + 1];
            theta[order] = 1.0;
            root_enumeration(cfg.get("n", 4usize)?, &theta, &cfg.list("seeds", "0..4")?)?
        }
        "compare" => {
            let p = protocol(cfg, "michaelis_menten", "er:20:0.1", 1, 50, 10)?;
            let dts = cfg.list::<usize>("dt", "1")?;
            let methods: Vec<Method> = cfg
                .get("methods", "gdp,single_step,mi,te".to_string())?
                .split(',')
                .map(|m| Method::from_tag(m.trim()).map_err(|e| CliError::Usage(e.to_string())))
                .collect::<CliResult<_>>()?;
            let seeds = cfg.list("seeds", "0..4")?;
            compare_methods(&p, &dts, &seeds, &cfg.train_config()?, &methods)?
        }
        "escape" => {
            let p = protocol(cfg, "kuramoto", "er:20:0.1", 1, 50, 10)?;
            let (warmup, window, jump) = (cfg.get("warmup", 1000usize)?, cfg.get("window", 50usize)?, cfg.get("jump", 10.0)?);
            let control = cfg.flag("control")?;
            escape_sweep(&p, &cfg.list("seeds", "0..4")?, &cfg.train_config()?, warmup, window, jump, control)?
        }
        "distortion" => {
            let p = protocol(cfg, "diffusion", "er:20:0.1", 1, 50, 10)?;
            let fractions = cfg.list("fractions", "0,0.1,0.3,0.5")?;
            distortion_experiment(&p, &fractions, &cfg.list("seeds", "0..9")?, &cfg.train_config()?)?
        }
        "ksweep" => {
            let p = protocol(cfg, "michaelis_menten", "er:20:0.1", 4, 50, 10)?;
            k_sweep(&p, &cfg.list("K", "1..6")?, &cfg.list("seeds", "0..9")?, &cfg.train_config()?)?
        }
        "ablation" => {
            let p = protocol(cfg, "diffusion", "er:20:0.1", 1, 50, 10)?;
            ablation_poly_only(&p, &cfg.list("seeds", "0..3")?, &cfg.train_config()?)?
        }
        "ws" => {
            let p = protocol(cfg, "diffusion", "ws:30:2:0", 1, 50, 10)?;
            ws_sweep(&p, &cfg.list("p", "0,0.25,0.5,1")?, &cfg.list("seeds", "0..9")?, &cfg.train_config()?)?
        }
        "stacking" => {
            let p = protocol(cfg, "springs", "er:20:0.1", 20, 50, 10)?;
            let with_gdp = cfg.flag("with_gdp")?;
            stacking_control(&p, &cfg.list("seeds", "0..4")?, &cfg.train_config()?, with_gdp)?
        }
        _ => unreachable!("tag checked by caller"),
    };
    Ok(report)
}

fn uses_training(tag: &str) -> bool {
    !matches!(tag, "fig2" | "fig3" | "roots")
}

/// Runs one analysis and writes `<out>/experiments/<name>.{json,csv}`.
pub fn experiment(tag: &str, mut cfg: RunConfig) -> CliResult<()> {
    let Some((_, keys)) = EXPERIMENTS.iter().find(|(t, _)| *t == tag) else {
        let tags: Vec<&str> = EXPERIMENTS.iter().map(|(t, _)| *t).collect();
        return usage(format!("unknown experiment `{tag}` (expected one of {})", tags.join(", ")));
    };
    let extra: &[&str] = if uses_training(tag) { TRAIN_KEYS } else { &[] };
    let protocol_keys: &[&str] = if uses_training(tag) { PROTOCOL_KEYS } else { &[] };
    cfg.check_keys(&[COMMON_KEYS, keys, extra, protocol_keys])?;
    if tag != "compare" && uses_training(tag) && cfg.raw("dt").is_some_and(|d| d.contains(',') || d.contains("..")) {
        return usage(format!("`{tag}` takes a single --dt; use `compare` to sweep intervals"));
    }
    let name = cfg.get("name", tag.to_string())?;
    let dir = cfg.out_root().join("experiments");
    let mut report = run_experiment(tag, &mut cfg)?;
    report.config = cfg.resolved();
    report.write(&dir, &name)?;
    for cell in &report.cells {
        let params: Vec<String> = cell.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let metrics: Vec<String> = cell.metrics.iter().map(|(k, s)| format!("{k} {:.4} ± {:.4}", s.mean, s.std)).collect();
        println!("[{}] n={} {}", params.join(" "), cell.seeds, metrics.join(", "));
    }
    println!("report written to {}", dir.join(format!("{name}.json")).display());
    Ok(())
}

/// Recomputes the AUC of a stored score matrix against an edge list.
pub fn eval(mut cfg: RunConfig) -> CliResult<()> {
    cfg.check_keys(&[&["scores", "truth", "directed"]])?;
    let truth = Graph::read_edge_list(Path::new(cfg.require("truth")?))?;
    let directed = cfg.get("directed", truth.directed())?;
    let scores = ScoreMatrix::read_csv(Path::new(cfg.require("scores")?), directed)?;
    let raw = if scores.directed() == truth.directed() { auc(&scores, &truth)? } else { auc(&scores.symmetrized(), &truth)? };
    println!("auc {raw:.6}");
    println!("auc_ambiguous {:.6}", score_auc(&scores, &truth)?);
    Ok(())
}
