use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gdp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdp")).args(args).env("GDP_OUT", out).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = gdp(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(out: &Path, args: &[&str]) -> i32 {
    gdp(out, args).status.code().unwrap()
}

const TINY: &[&str] = &["--epochs", "4", "--hidden", "6", "--activation", "relu", "--val_every", "2"];

fn generate(out: &Path) {
    ok(out, &["generate", "--system", "diffusion", "--graph", "er:8:0.3", "--dt", "1", "--traj", "5", "--len", "6", "--valid", "2", "--seed", "7"]);
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_a_reproducible_dataset() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let data = dir.path().join("diffusion");
    let manifest = fs::read(data.join("manifest.json")).unwrap();
    assert_eq!(fs::read_dir(data.join("train")).unwrap().count(), 5);
    assert!(fs::read_to_string(data.join("train/000.csv")).unwrap().starts_with("t,node,dim0\n"));
    assert!(fs::read_to_string(data.join("graph.txt")).unwrap().starts_with("n 8 directed 0"));
    let m = json(&data.join("manifest.json"));
    assert_eq!(m["config"]["graph"], "er:8:0.3");
    assert_eq!(m["config"]["out"], dir.path().to_str().unwrap());
    assert!(m["version"].as_str().unwrap().starts_with("gdp "));

    let first = fs::read(data.join("train/003.csv")).unwrap();
    generate(dir.path());
    assert_eq!(fs::read(data.join("manifest.json")).unwrap(), manifest);
    assert_eq!(fs::read(data.join("train/003.csv")).unwrap(), first);
}

#[test]
fn train_summary_matches_rescoring_the_written_scores() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let data = dir.path().join("diffusion");
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--seeds", "0..1"];
    args.extend_from_slice(TINY);
    let stdout = ok(dir.path(), &args);
    assert!(stdout.starts_with("gdp auc "), "{stdout}");

    let run = dir.path().join("runs/diffusion/gdp");
    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["config"]["epochs"], "4");
    for (i, seed) in ["seed_0", "seed_1"].iter().enumerate() {
        let scores = run.join(seed).join("scores.csv");
        let eval = ok(dir.path(), &["eval", "--scores", scores.to_str().unwrap(), "--truth", data.join("graph.txt").to_str().unwrap()]);
        let rescored: f64 = eval.lines().find_map(|l| l.strip_prefix("auc_ambiguous ")).unwrap().parse().unwrap();
        assert!((rescored - summary["runs"][i]["auc"].as_f64().unwrap()).abs() < 1e-5);
        let ck = json(&run.join(seed).join("checkpoint.json"));
        assert_eq!(ck["config"]["hidden"], "6");
        assert_eq!(ck["seed"], i as u64);
        let history = fs::read_to_string(run.join(seed).join("history.csv")).unwrap();
        assert_eq!(history.lines().count(), 5);
    }
}

#[test]
fn reruns_and_parallel_seeds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let data = dir.path().join("diffusion");
    let base = |name: &str, jobs: &str| {
        let mut a = vec!["train", "--data", data.to_str().unwrap(), "--seeds", "0..2", "--name", name, "--jobs", jobs];
        a.extend_from_slice(TINY);
        ok(dir.path(), &a);
        fs::read(dir.path().join("runs").join(name).join("gdp/seed_2/checkpoint.json")).unwrap()
    };
    let a = base("a", "1");
    let b = base("a", "1");
    assert_eq!(a, b);
    // only the recorded `jobs`/`name` values may differ
    let c = base("c", "3");
    let strip = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v["config"].as_object_mut().unwrap().retain(|k, _| k != "jobs" && k != "name");
        v
    };
    assert_eq!(strip(&a), strip(&c));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let conf = dir.path().join("desk.conf");
    fs::write(&conf, "# tiny run\nepochs = 7\nhidden = 5\nactivation = relu\nbaseline = single-step\n").unwrap();
    let data = dir.path().join("diffusion");
    ok(dir.path(), &["train", "--config", conf.to_str().unwrap(), "--data", data.to_str().unwrap(), "--epochs", "2"]);
    let ck = json(&dir.path().join("runs/diffusion/single_step/seed_0/checkpoint.json"));
    assert_eq!(ck["config"]["epochs"], "2");
    assert_eq!(ck["config"]["hidden"], "5");
    assert_eq!(ck["history"]["epochs"].as_array().unwrap().len(), 2);
}

#[test]
fn statistical_baselines_and_external_data() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let data = dir.path().join("diffusion");
    let out = ok(dir.path(), &["train", "--data", data.to_str().unwrap(), "--baseline", "te", "--bins", "4"]);
    assert!(out.starts_with("te auc "));
    assert!(dir.path().join("runs/diffusion/te/scores.csv").exists());

    // an external dataset without a known graph still yields scores
    let mut m = json(&data.join("manifest.json"));
    m["ground_truth"] = serde_json::Value::Null;
    fs::write(data.join("external.json"), m.to_string()).unwrap();
    let out = ok(dir.path(), &["train", "--data", data.join("external.json").to_str().unwrap(), "--baseline", "mi", "--name", "ext"]);
    assert!(out.contains("no ground truth"), "{out}");
    assert!(dir.path().join("runs/ext/mi/scores.csv").exists());
}

#[test]
fn experiments_write_reports_with_their_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["experiment", "fig3", "--graph", "er:20:0.2", "--K", "1,3", "--eps", "0,0.05", "--draws", "5"]);
    let r = json(&dir.path().join("experiments/fig3.json"));
    assert_eq!(r["experiment"], "fig3");
    assert_eq!(r["config"]["K"], "1,3");
    assert_eq!(r["cells"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("experiments/fig3.csv")).unwrap();
    assert!(csv.starts_with("experiment,"));

    let out = ok(dir.path(), &["experiment", "roots", "--order", "3", "--seeds", "0..1", "--name", "cubic"]);
    assert!(out.contains("validated 1.0000"), "{out}");
    let mut args = vec!["experiment", "stacking", "--graph", "er:6:0.4", "--traj", "3", "--len", "4", "--valid", "1", "--dt", "2", "--seeds", "0"];
    args.extend_from_slice(TINY);
    ok(dir.path(), &args);
    assert!(dir.path().join("experiments/stacking.json").exists());
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(p, &[]), 1);
    assert_eq!(code(p, &["--help"]), 0);
    assert_eq!(code(p, &["generate", "--system", "lorenz", "--graph", "er:8:0.3"]), 1);
    assert_eq!(code(p, &["generate", "--system", "diffusion", "--graph", "er:8"]), 1);
    assert_eq!(code(p, &["generate", "--system", "diffusion"]), 1);
    assert_eq!(code(p, &["experiment", "fig9"]), 1);
    assert_eq!(code(p, &["experiment", "fig3", "--bogus", "1"]), 1);
    assert_eq!(code(p, &["experiment", "ablation", "--dt", "1,2"]), 1);
    assert_eq!(code(p, &["train", "--data", "/nonexistent/manifest.json"]), 2);
    assert_eq!(code(p, &["eval", "--scores", "/nonexistent.csv", "--truth", "/nonexistent.txt"]), 2);
    generate(p);
    let data = p.join("diffusion");
    assert_eq!(code(p, &["train", "--data", data.to_str().unwrap(), "--epochs", "x"]), 1);
    let diverge = ["train", "--data", data.to_str().unwrap(), "--epochs", "3", "--hidden", "4", "--lr_graph", "1e200", "--lr_surrogate", "1e200"];
    assert_eq!(code(p, &diverge), 3);
}
