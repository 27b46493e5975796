use super::forward::{loss_on_tape, LossPlan};
use super::*;
use crate::dynamics::{build_dataset, DataConfig, Dataset, SystemParams};
use crate::graphs::{gen_er, sym_normalize};

fn shape(n: usize, directed: bool, d_s: usize, d_f: usize, k: usize) -> ModelShape {
    ModelShape {
        n,
        directed,
        tied: !directed,
        state_dims: d_s,
        static_dims: d_f,
        hidden: 6,
        k,
        rounds: 1,
        activation: Activation::Tanh,
        generator: GeneratorConfig::default(),
    }
}

fn small_data(tag: &str, n: usize, seed: u64) -> Dataset {
    let params = SystemParams::from_tag(tag).unwrap();
    let directed = tag == "fj";
    let g = gen_er(n, 0.4, seed, directed).unwrap();
    build_dataset(&params, &g, &DataConfig { n_valid: 2, ..DataConfig::new(2, 4, 1, seed) }).unwrap()
}

fn model_for(data: &Dataset, k: usize, seed: u64) -> GdpModel {
    GdpModel::init(shape(data.n(), data.directed, data.state_dims(), data.static_dims(), k), seed).unwrap()
}

fn both() -> LossPlan {
    LossPlan { adjacency: 1.0, polynomial: 1.0, train_graph: true }
}

#[test]
fn swapping_edge_types_leaves_loss_bit_identical() {
    let data = small_data("diffusion", 7, 3);
    let batch = Transitions::from_trajectories(&data.train).unwrap().all().unwrap();
    let mut model = model_for(&data, 3, 5);
    // break the uniform initialization of θ so both filter types differ
    model.poly.theta.data_mut().copy_from_slice(&[0.2, 0.7, -0.3, 0.1]);
    let before = gdp_loss(&model, &batch).unwrap();
    model.swap_edge_types();
    let after = gdp_loss(&model, &batch).unwrap();
    assert_eq!(before.to_bits(), after.to_bits());
}

#[test]
fn polynomial_branch_alone_moves_the_shared_logits() {
    let data = small_data("mm", 6, 1);
    let batch = Transitions::from_trajectories(&data.train).unwrap().all().unwrap();
    let model = model_for(&data, 2, 2);
    let mut tape = Tape::new();
    let plan = LossPlan { adjacency: 0.0, polynomial: 1.0, train_graph: true };
    let (loss, reg) = loss_on_tape(&mut tape, &model, &batch, plan).unwrap();
    let grads = tape.backward(loss).unwrap();
    let g = grads.get(reg.psi).expect("logits receive a gradient");
    assert!(g.iter().any(|v| v.abs() > 1e-12));
    assert!(grads.get(reg.theta).unwrap().iter().any(|v| v.abs() > 1e-12));
    assert!(reg.adjacency.iter().all(|v| grads.get(*v).is_none()));
}

#[test]
fn frozen_logits_get_no_gradient() {
    let data = small_data("mm", 5, 1);
    let batch = Transitions::from_trajectories(&data.train).unwrap().all().unwrap();
    let model = model_for(&data, 2, 2);
    let mut tape = Tape::new();
    let plan = LossPlan { train_graph: false, ..both() };
    let (loss, reg) = loss_on_tape(&mut tape, &model, &batch, plan).unwrap();
    assert!(tape.backward(loss).unwrap().get(reg.psi).is_none());
}

#[test]
fn identity_coefficients_reproduce_normalized_adjacency() {
    let g = gen_er(8, 0.35, 9, false).unwrap();
    let psi = EdgeLogits::from_graph(&g, true, 40.0).unwrap();
    let (a0, a1) = edge_probabilities(&psi, &GeneratorConfig { beta: 1.0 }).unwrap();
    let (f0, f1) = branch_filters(&a0, &a1, &[0.0, 1.0, 0.0, 0.0], FilterSource::Polynomial, false).unwrap();
    assert!(f1.sub(&sym_normalize(&g).unwrap()).unwrap().max_abs() < 1e-10);
    assert!(f0.sub(&sym_normalize(&g.complement()).unwrap()).unwrap().max_abs() < 1e-10);

    let mut rng = rand::SeedableRng::seed_from_u64(4);
    let branch = SurrogateBranch::init(&mut rng, FilterSource::Polynomial, 1, 1, 5, 1);
    let x = Matrix::from_fn(8, 1, |i, _| (i as f64).cos());
    let via_filters = surrogate_step(&branch, &f0, &f1, &x, Activation::Elu).unwrap();
    let exact = surrogate_step(&branch, &sym_normalize(&g.complement()).unwrap(), &sym_normalize(&g).unwrap(), &x, Activation::Elu).unwrap();
    assert!(via_filters.sub(&exact).unwrap().max_abs() < 1e-10);
}

/// Direct evaluation of the surrogate with explicit loops over node pairs.
fn reference_step(branch: &SurrogateBranch, filters: [&Matrix; 2], x: &Matrix, act: fn(f64) -> f64) -> Matrix {
    let n = x.rows();
    let lin = |l: &Linear, v: &[f64]| -> Vec<f64> {
        let (fan_in, fan_out) = (l.w.shape()[0], l.w.shape()[1]);
        (0..fan_out).map(|o| l.b.data()[o] + (0..fan_in).map(|i| v[i] * l.w.data()[i * fan_out + o]).sum::<f64>()).collect()
    };
    let mut out = Matrix::zeros(n, branch.vertex.last().unwrap().b.len());
    for r in 0..n {
        let mut msg = vec![0.0; branch.rounds[0][0].out.b.len()];
        for (a, e) in branch.rounds[0].iter().enumerate() {
            let h = e.hidden();
            let d_in = x.cols();
            for s in 0..n {
                if s == r {
                    continue;
                }
                let hidden: Vec<f64> = (0..h)
                    .map(|k| {
                        let z = e.b1.data()[k]
                            + (0..d_in).map(|i| x[(s, i)] * e.sender.data()[i * h + k] + x[(r, i)] * e.receiver.data()[i * h + k]).sum::<f64>();
                        act(z)
                    })
                    .collect();
                for (m, v) in msg.iter_mut().zip(lin(&e.out, &hidden)) {
                    *m += filters[a][(r, s)] * v;
                }
            }
        }
        let z1: Vec<f64> = lin(&branch.vertex[0], &msg).into_iter().map(act).collect();
        let z2: Vec<f64> = lin(&branch.vertex[1], &z1).into_iter().map(act).collect();
        for (d, v) in lin(&branch.vertex[2], &z2).into_iter().enumerate() {
            out[(r, d)] = x[(r, d)] + v;
        }
    }
    out
}

#[test]
fn surrogate_matches_pairwise_reference() {
    let mut rng = rand::SeedableRng::seed_from_u64(11);
    let branch = SurrogateBranch::init(&mut rng, FilterSource::Adjacency, 2, 2, 3, 1);
    let f0 = Matrix::from_vec(3, 3, vec![0.9, 0.2, 0.7, 0.1, 0.0, 0.4, 0.6, 0.3, 0.5]).unwrap();
    let f1 = Matrix::from_fn(3, 3, |i, j| 1.0 - f0[(i, j)]);
    let x = Matrix::from_vec(3, 2, vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.9]).unwrap();
    let got = surrogate_step(&branch, &f0, &f1, &x, Activation::Tanh).unwrap();
    let want = reference_step(&branch, [&f0, &f1], &x, f64::tanh);
    assert!(got.sub(&want).unwrap().max_abs() < 1e-12, "{got:?} vs {want:?}");
}

#[test]
fn gradients_are_finite_on_every_system() {
    for tag in crate::dynamics::SYSTEM_TAGS {
        let data = small_data(tag, 10, 2);
        let batch = Transitions::from_trajectories(&data.train).unwrap().all().unwrap();
        let model = model_for(&data, 3, 1);
        let mut tape = Tape::new();
        let (loss, reg) = loss_on_tape(&mut tape, &model, &batch, both()).unwrap();
        assert!(tape.value(loss)[0].is_finite(), "{tag}");
        let grads = tape.backward(loss).unwrap();
        let mut handles = vec![reg.psi, reg.theta];
        handles.extend(&reg.adjacency);
        handles.extend(&reg.polynomial);
        for h in handles {
            if let Some(g) = grads.get(h) {
                assert!(g.iter().all(|v| v.is_finite()), "{tag}");
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for directed in [false, true] {
        let data = small_data(if directed { "fj" } else { "diffusion" }, 4, 6);
        let batch = Transitions::from_trajectories(&data.train).unwrap().all().unwrap();
        let mut model = model_for(&data, 2, 8);
        model.poly.theta.data_mut().copy_from_slice(&[0.1, 0.8, 0.3]);
        let mut tape = Tape::new();
        let (loss, reg) = loss_on_tape(&mut tape, &model, &batch, both()).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g_psi = grads.get(reg.psi).unwrap().to_vec();
        let g_theta = grads.get(reg.theta).unwrap().to_vec();
        let h = 1e-6;
        let check = |m: &mut GdpModel, which: usize, i: usize, analytic: f64| {
            fn tensor(m: &mut GdpModel, which: usize) -> &mut Tensor {
                if which == 0 {
                    &mut m.psi.values
                } else {
                    &mut m.poly.theta
                }
            }
            let orig = tensor(m, which).data()[i];
            tensor(m, which).data_mut()[i] = orig + h;
            let up = gdp_loss(m, &batch).unwrap();
            tensor(m, which).data_mut()[i] = orig - h;
            let down = gdp_loss(m, &batch).unwrap();
            tensor(m, which).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()), "{which}/{i}: {numeric} vs {analytic}");
        };
        for i in 0..g_psi.len() {
            check(&mut model, 0, i, g_psi[i]);
        }
        for i in 0..g_theta.len() {
            check(&mut model, 1, i, g_theta[i]);
        }
    }
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, hidden: 8, k: 2, val_every: 2, lr_surrogate: 5e-3, ..TrainConfig::default() }
}

#[test]
fn zero_epochs_returns_initialization() {
    let data = small_data("diffusion", 6, 1);
    let cfg = quick_config(0);
    let trained = train(&data, &cfg, 3).unwrap();
    assert!(trained.history.epochs.is_empty());
    assert_eq!(trained.model, GdpModel::init(cfg.shape(&data), 3).unwrap());
}

#[test]
fn training_is_deterministic_and_records_history() {
    let data = small_data("diffusion", 6, 1);
    let cfg = TrainConfig { batch_size: 3, ..quick_config(5) };
    let a = train(&data, &cfg, 3).unwrap();
    let b = train(&data, &cfg, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.epochs.len(), 5);
    let with_val: Vec<usize> = a.history.epochs.iter().filter(|e| e.valid_loss.is_some()).map(|e| e.epoch).collect();
    assert_eq!(with_val, vec![1, 3, 4]);
    assert!(a.history.epochs.iter().all(|e| e.auc.is_some() && e.poly_active));
    let c = train(&data, &cfg, 4).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn warmup_switches_polynomial_branch_on() {
    let data = small_data("mm", 5, 1);
    let cfg = TrainConfig { poly_from: Some(2), ..quick_config(4) };
    let t = train(&data, &cfg, 1).unwrap();
    let flags: Vec<bool> = t.history.epochs.iter().map(|e| e.poly_active).collect();
    assert_eq!(flags, vec![false, false, true, true]);
    let single = train(&data, &quick_config(3).single_step(), 1).unwrap();
    assert!(single.history.epochs.iter().all(|e| !e.poly_active));
    assert_eq!(single.model.poly, GdpModel::init(cfg.shape(&data), 1).unwrap().poly);
}

#[test]
fn frozen_graph_keeps_logits() {
    let data = small_data("diffusion", 5, 1);
    let g = data.graph.clone().unwrap();
    let cfg = TrainConfig { freeze_graph: true, ..quick_config(3) };
    let mut init = GdpModel::init(cfg.shape(&data), 2).unwrap();
    init.psi = EdgeLogits::from_graph(&g, true, 10.0).unwrap();
    let t = train_from(&data, &cfg, init.clone(), 2).unwrap();
    assert_eq!(t.model.psi, init.psi);
    assert_ne!(t.model.adjacency, init.adjacency);
}

#[test]
fn bad_configurations_are_rejected() {
    let data = small_data("diffusion", 5, 1);
    for cfg in [
        TrainConfig { lr_graph: 0.0, ..quick_config(1) },
        TrainConfig { k: 0, ..quick_config(1) },
        TrainConfig { adjacency_weight: 0.0, poly_from: None, ..quick_config(1) },
        TrainConfig { tied: Some(true), ..quick_config(1) },
    ] {
        let directed = data.directed;
        let res = train(&data, &cfg, 0);
        assert!(res.is_err() || (cfg.tied == Some(true) && !directed));
    }
    let fj = small_data("fj", 5, 1);
    assert!(train(&fj, &TrainConfig { tied: Some(true), ..quick_config(1) }, 0).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let data = small_data("kuramoto", 5, 1);
    let t = train(&data, &quick_config(2), 7).unwrap();
    let mut run = std::collections::BTreeMap::new();
    run.insert("system".to_string(), "kuramoto".to_string());
    let ck = Checkpoint::new(&t, run);
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.trained(), t);
    assert_eq!(predict_scores(&back.model).unwrap(), predict_scores(&t.model).unwrap());
    let mut broken = ck.clone();
    broken.model.shape.k = 5;
    assert!(Checkpoint::from_json(&broken.to_json().unwrap()).is_err());
}
