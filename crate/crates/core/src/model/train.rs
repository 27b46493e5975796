use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dynamics::Dataset;
use crate::error::{contract, GdpError, Result};
use crate::experiments::auc_ambiguous;
use crate::numcore::{Activation, AdamState, Tape, Tensor};
use crate::rng::stream;

use super::forward::{loss_on_tape, Batch, LossPlan, Registered, Transitions};
use super::{predict_scores, GdpModel, GeneratorConfig, ModelShape};

/// Optimization settings and architecture switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_graph: f64,
    pub lr_surrogate: f64,
    pub beta: f64,
    /// Polynomial order `K`.
    pub k: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// Validation MSE is measured every this many epochs and at the last one.
    pub val_every: usize,
    /// Samples per optimizer step; 0 means the whole training set.
    pub batch_size: usize,
    /// Share one logit pair between `i → j` and `j → i`. Defaults to tied
    /// for undirected targets.
    pub tied: Option<bool>,
    /// Message-passing rounds per surrogate.
    pub rounds: usize,
    pub adjacency_weight: f64,
    pub poly_weight: f64,
    /// First epoch that includes the polynomial branch; `None` never does.
    pub poly_from: Option<usize>,
    /// Keep the edge logits at their initial values.
    pub freeze_graph: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            lr_graph: 0.1,
            lr_surrogate: 5e-4,
            beta: 0.5,
            k: 4,
            hidden: 256,
            activation: Activation::Elu,
            val_every: 10,
            batch_size: 0,
            tied: None,
            rounds: 1,
            adjacency_weight: 1.0,
            poly_weight: 1.0,
            poly_from: Some(0),
            freeze_graph: false,
        }
    }
}

impl TrainConfig {
    /// The adjacency surrogate alone.
    pub fn single_step(self) -> Self {
        Self { poly_from: None, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_graph > 0.0 && self.lr_surrogate > 0.0) {
            return contract("learning rates must be positive");
        }
        if !(self.beta > 0.0) {
            return contract("beta must be positive");
        }
        if self.k < 1 || self.hidden == 0 || self.rounds == 0 || self.val_every == 0 {
            return contract("k, hidden, rounds and val_every must be positive");
        }
        if !(self.adjacency_weight >= 0.0 && self.poly_weight >= 0.0) {
            return contract("loss weights must be non-negative");
        }
        let poly_from_start = self.poly_from == Some(0) && self.poly_weight > 0.0;
        if self.adjacency_weight == 0.0 && !poly_from_start {
            return contract("without the adjacency branch the polynomial branch must be active from epoch 0");
        }
        Ok(())
    }

    pub fn shape(&self, data: &Dataset) -> ModelShape {
        ModelShape {
            n: data.n(),
            directed: data.directed,
            tied: self.tied.unwrap_or(!data.directed),
            state_dims: data.state_dims(),
            static_dims: data.static_dims(),
            hidden: self.hidden,
            k: self.k,
            rounds: self.rounds,
            activation: self.activation,
            generator: GeneratorConfig { beta: self.beta },
        }
    }

    fn plan(&self, epoch: usize) -> LossPlan {
        let poly = self.poly_from.is_some_and(|w| epoch >= w);
        LossPlan {
            adjacency: self.adjacency_weight,
            polynomial: if poly { self.poly_weight } else { 0.0 },
            train_graph: !self.freeze_graph,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    /// Orientation-free AUC of the current logits; `None` without ground truth.
    pub auc: Option<f64>,
    pub poly_active: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn aucs(&self) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.auc).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: GdpModel,
    pub history: History,
    pub config: TrainConfig,
    pub seed: u64,
}

/// Initializes a model from `seed` and trains it.
pub fn train(data: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    cfg.validate()?;
    let model = GdpModel::init(cfg.shape(data), seed)?;
    train_from(data, cfg, model, seed)
}

fn diverged(epoch: usize) -> impl Fn(GdpError) -> GdpError {
    move |e| match e {
        GdpError::NonFinite { .. } => GdpError::TrainingDiverged { epoch },
        other => other,
    }
}

fn apply_gradients(
    model: &mut GdpModel,
    grads: &crate::numcore::Gradients,
    reg: &Registered,
    plan: LossPlan,
    opt: &mut [AdamState; 3],
) -> Result<()> {
    if plan.train_graph {
        grads.accumulate_into(reg.psi, &mut model.psi.values)?;
        opt[0].step(&mut [&mut model.psi.values])?;
    }
    if plan.adjacency > 0.0 {
        let mut params = model.adjacency.tensors_mut();
        for (v, t) in reg.adjacency.iter().zip(params.iter_mut()) {
            grads.accumulate_into(*v, t)?;
        }
        opt[1].step(&mut params)?;
    }
    if plan.polynomial > 0.0 {
        let mut params: Vec<&mut Tensor> = model.polynomial.tensors_mut();
        for (v, t) in reg.polynomial.iter().zip(params.iter_mut()) {
            grads.accumulate_into(*v, t)?;
        }
        grads.accumulate_into(reg.theta, &mut model.poly.theta)?;
        params.push(&mut model.poly.theta);
        opt[2].step(&mut params)?;
    }
    Ok(())
}

fn evaluate(model: &GdpModel, batch: &Batch, plan: LossPlan) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = loss_on_tape(&mut tape, model, batch, plan)?;
    Ok(tape.value(loss)[0])
}

/// Trains `model` in place of a fresh initialization, keeping the parameters
/// with the lowest validation loss.
pub fn train_from(data: &Dataset, cfg: &TrainConfig, mut model: GdpModel, seed: u64) -> Result<TrainedModel> {
    cfg.validate()?;
    if model.shape != cfg.shape(data) {
        return contract("model shape does not match the dataset and configuration");
    }
    let train_set = Transitions::from_trajectories(&data.train)?;
    let valid_batch = if data.valid.is_empty() {
        train_set.all()?
    } else {
        Transitions::from_trajectories(&data.valid)?.all()?
    };
    let mut opt = [AdamState::new(cfg.lr_graph), AdamState::new(cfg.lr_surrogate), AdamState::new(cfg.lr_surrogate)];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let chunk = if cfg.batch_size == 0 { order.len() } else { cfg.batch_size };
    let full = if cfg.batch_size == 0 || cfg.batch_size >= order.len() { Some(train_set.all()?) } else { None };
    let mut rng = stream(seed, "batches");

    let mut history = History::default();
    let mut best: Option<(f64, GdpModel)> = None;
    for epoch in 0..cfg.epochs {
        let plan = cfg.plan(epoch);
        let mut total = 0.0;
        let mut steps = 0usize;
        if full.is_none() {
            order.shuffle(&mut rng);
        }
        for idx in order.chunks(chunk) {
            let owned;
            let batch = match &full {
                Some(b) => b,
                None => {
                    owned = train_set.batch(idx)?;
                    &owned
                }
            };
            let mut tape = Tape::new();
            let (loss, reg) = loss_on_tape(&mut tape, &model, batch, plan).map_err(diverged(epoch))?;
            total += tape.value(loss)[0];
            steps += 1;
            let grads = tape.backward(loss)?;
            apply_gradients(&mut model, &grads, &reg, plan, &mut opt).map_err(diverged(epoch))?;
        }

        let auc = match &data.graph {
            Some(g) => Some(auc_ambiguous(&predict_scores(&model)?, g)?),
            None => None,
        };
        let last = epoch + 1 == cfg.epochs;
        let valid_loss = if (epoch + 1) % cfg.val_every == 0 || last {
            let v = evaluate(&model, &valid_batch, plan).map_err(diverged(epoch))?;
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, model.clone()));
                history.best_epoch = Some(epoch);
            }
            Some(v)
        } else {
            None
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / steps.max(1) as f64,
            valid_loss,
            auc,
            poly_active: plan.polynomial > 0.0,
        });
    }
    let model = best.map_or(model, |(_, m)| m);
    Ok(TrainedModel { model, history, config: cfg.clone(), seed })
}
